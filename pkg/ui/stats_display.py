from sgt_transform import BlockStats, WindowStats

from .data_grid import DataGrid

# tiles at least this full are shown green
DENSE_ENOUGH = 0.5


def _density_markup(density: float) -> str:
    colour = "green" if density >= DENSE_ENOUGH else "red"
    return f"[{colour}]{density:.4f}[/{colour}]"


class StatsDisplay(DataGrid):
    """Block accounting of the loaded transform, or of one selected window."""

    def show_blocks(self, stats: BlockStats, geometry: str) -> None:
        self.update_data(
            {
                "Geometry": geometry,
                "TC blocks": f"{stats.block_counter:,}",
                "Capacity": f"{stats.capacity:,}",
                "Non-zeros": f"{stats.nnz:,}",
                "Tile density": _density_markup(stats.mean_tile_density),
            }
        )

    def show_window(self, ws: WindowStats, cut: int) -> None:
        self.update_data(
            {
                "Window": str(ws.window),
                "Rows": str(ws.rows),
                "Unique columns": str(ws.unique_cols),
                "Tiles (tile/scalar path)": f"{ws.tiles} ({cut}/{ws.tiles - cut})",
                "Non-zeros": str(ws.nnz),
                "Tile density": _density_markup(ws.density),
            }
        )

    def show_empty(self) -> None:
        self.update_data({"Graph": "[red]none loaded[/red]"})
