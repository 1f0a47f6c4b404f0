from textual.widgets import DataTable

from sgt_transform import WindowStats


class WindowTable(DataTable):
    """Per row window: rows, unique columns, tiles and how many take the tile path."""

    def __init__(self) -> None:
        super().__init__(zebra_stripes=True, cursor_type="row")
        self.add_columns("Window", "Rows", "Unique cols", "Tiles", "Tile path", "Scalar path", "NNZ", "Density")

    def update_windows(self, windows: list[WindowStats], cuts: list[int]) -> None:
        existing_keys = {row.key.value for row in self.rows.values()}
        for ws, cut in zip(windows, cuts):
            row_key = f"win-{ws.window}"
            colour = "green" if ws.density >= 0.5 else "red"
            row_values = [
                str(ws.window),
                str(ws.rows),
                str(ws.unique_cols),
                str(ws.tiles),
                str(cut),
                str(ws.tiles - cut),
                str(ws.nnz),
                f"[{colour}]{ws.density:.3f}[/{colour}]",
            ]
            if row_key in existing_keys:
                for col_key, value in zip(self.columns.keys(), row_values):
                    self.update_cell(row_key, col_key, value)
            else:
                self.add_row(*row_values, key=row_key)

        wanted = {f"win-{ws.window}" for ws in windows}
        for key in list(existing_keys):
            if key not in wanted:
                self.remove_row(key)
