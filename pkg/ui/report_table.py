from textual.widgets import DataTable

from bench_service import BenchRow
from config import ORACLE_RTOL


class ReportTable(DataTable):
    """Bench rows: one per (dataset, kernel, path)."""

    def __init__(self, key_prefix: str = "run", **kwargs) -> None:
        super().__init__(zebra_stripes=True, **kwargs)
        self.key_prefix = key_prefix
        self.add_columns(
            "Dataset",
            "Kernel",
            "Path",
            "Median ms",
            "Blocks",
            "Capacity",
            "NNZ",
            "Density",
            "Max rel err",
        )

    def update_rows(self, rows: list[BenchRow]) -> None:
        """Add or refresh rows in place, keyed by position in *rows*."""
        existing_keys = {row.key for row in self.rows.values()}

        for idx, r in enumerate(rows):
            row_key = f"{self.key_prefix}-{idx}"
            if r.max_rel_err is None:
                err = "-"
            else:
                colour = "green" if r.max_rel_err <= ORACLE_RTOL else "red"
                err = f"[{colour}]{r.max_rel_err:.2e}[/{colour}]"
            row_values = [
                r.dataset,
                r.kernel,
                r.path,
                f"{r.median_ms:,.3f}",
                f"{r.blocks:,}",
                f"{r.capacity:,}",
                f"{r.nnz:,}",
                f"{r.density:.4f}",
                err,
            ]

            if row_key in existing_keys:
                for col_key, value in zip(self.columns.keys(), row_values):
                    self.update_cell(row_key, col_key, value)
            else:
                self.add_row(*row_values, key=row_key)

        # drop rows beyond the new list
        wanted = {f"{self.key_prefix}-{idx}" for idx in range(len(rows))}
        for key in list(existing_keys):
            if key.value not in wanted:
                self.remove_row(key)
