# Report viewer: bench rows on the left, per-window tile statistics and a split preview on the right

from textual import on
from textual.app import App, ComposeResult
from textual.containers import Horizontal, Vertical, VerticalScroll
from textual.widgets import DataTable, Footer, TabbedContent, TabPane

from bench_service import BenchRow
from errors import SgtkError
from sgt_transform import TransformedGraph, block_stats, window_stats
from tile_exec import make_split_plan
from ui import ReportTable, SplitForm, StatsDisplay, WindowTable


class ReportApp(App):
    CSS_PATH = "app.tcss"
    BINDINGS = [("q", "quit", "Quit")]

    def __init__(self, rows: list[BenchRow] | None = None, transformed: TransformedGraph | None = None) -> None:
        super().__init__()
        self.rows = rows or []
        self.transformed = transformed
        self.windows = window_stats(transformed) if transformed is not None else []
        self.cuts: list[int] = [ws.tiles for ws in self.windows]
        self.stats_widget = StatsDisplay(id="stats")
        self.split_form = SplitForm(id="split_form")

    def compose(self) -> ComposeResult:
        # built in compose so each run_test gets fresh tables
        self.report_table = ReportTable()
        self.window_table = WindowTable()

        with Horizontal(id="root"):
            with TabbedContent(initial="tab_runs", id="left_pane"):
                with TabPane("Runs", id="tab_runs"):
                    yield VerticalScroll(self.report_table, id="runs")
                with TabPane("Windows", id="tab_windows"):
                    yield VerticalScroll(self.window_table, id="windows")
            yield Vertical(self.stats_widget, self.split_form, id="right_pane")
        yield Footer()

    def on_mount(self) -> None:
        self.report_table.update_rows(self.rows)
        self._show_graph()
        self._refresh_tab_labels()

    def _show_graph(self) -> None:
        if self.transformed is None:
            self.stats_widget.show_empty()
            return
        self.stats_widget.show_blocks(block_stats(self.transformed), str(self.transformed.geometry))
        self.window_table.update_windows(self.windows, self.cuts)

    def _refresh_tab_labels(self) -> None:
        """Show row and window counts in the tab labels."""
        tabs = self.query_one(TabbedContent)
        runs = tabs.get_tab("tab_runs")
        runs.label = f"Runs ({len(self.rows)})" if self.rows else "Runs"
        windows = tabs.get_tab("tab_windows")
        windows.label = f"Windows ({len(self.windows)})" if self.windows else "Windows"

    @on(SplitForm.Submit)
    def split_submitted(self, message: SplitForm.Submit) -> None:
        if self.transformed is None:
            self.log("No graph loaded; split ignored")
            return
        try:
            plan = make_split_plan(self.transformed, message.ratio)
        except SgtkError as exc:
            self.log(f"Bad split: {exc}")
            return
        self.cuts = [int(c) for c in plan.per_window_tile_cut]
        self.window_table.update_windows(self.windows, self.cuts)
        self.log(f"Split {plan.ratio:g}: {plan.tile_path_blocks()}/{self.transformed.block_counter} tiles on tile path")

    @on(DataTable.RowSelected)
    def window_selected(self, event: DataTable.RowSelected) -> None:
        if event.data_table is not self.window_table:
            return
        window = int(event.row_key.value.removeprefix("win-"))
        self.stats_widget.show_window(self.windows[window], self.cuts[window])


if __name__ == "__main__":
    ReportApp().run()
