import asyncio

from textual.widgets import TabbedContent

from app import ReportApp
from bench_service import BenchRow
from dataset_service import BlockDenseSpec, make_synthetic
from sgt_transform import sgt_transform
from ui import SplitForm

ROWS = [
    BenchRow("blockdense", "spmm", "tile", 1.5, 6, 768, 768, 1.0, 2e-7),
    BenchRow("blockdense", "spmm", "scalar", 3.0, 6, 768, 768, 1.0, 3e-3),
    BenchRow("blockdense", "spmm", "hybrid", 1.6, 6, 768, 768, 1.0),
]


def blockdense():
    return sgt_transform(make_synthetic(BlockDenseSpec(windows=3, tiles_per_window=2)))


def window_cuts(app: ReportApp) -> list[str]:
    table = app.window_table
    return [str(table.get_row(f"win-{w}")[4]) for w in range(len(app.windows))]


def test_empty_viewer():
    async def run():
        app = ReportApp()
        async with app.run_test() as pilot:
            await pilot.pause()
            assert app.report_table.row_count == 0
            assert app.window_table.row_count == 0
            assert "Graph" in app.stats_widget.data

    asyncio.run(run())


def test_rows_and_windows_are_listed():
    async def run():
        app = ReportApp(rows=ROWS, transformed=blockdense())
        async with app.run_test(size=(160, 48)) as pilot:
            await pilot.pause()
            assert app.report_table.row_count == 3
            assert app.window_table.row_count == 3
            assert window_cuts(app) == ["2", "2", "2"]
            tabs = app.query_one(TabbedContent)
            assert tabs.get_tab("tab_runs").label.plain == "Runs (3)"
            assert tabs.get_tab("tab_windows").label.plain == "Windows (3)"
            assert app.stats_widget.data["TC blocks"] == "6"

    asyncio.run(run())


def test_split_submit_updates_cuts():
    async def run():
        app = ReportApp(transformed=blockdense())
        async with app.run_test(size=(160, 48)) as pilot:
            await pilot.pause()
            app.split_form.post_message(SplitForm.Submit(0.5))
            await pilot.pause()
            assert app.cuts == [1, 1, 1]
            assert window_cuts(app) == ["1", "1", "1"]

            await pilot.click("#all_scalar")
            await pilot.pause()
            assert app.cuts == [0, 0, 0]

    asyncio.run(run())


def test_bad_ratio_is_rejected():
    async def run():
        app = ReportApp(transformed=blockdense())
        async with app.run_test(size=(160, 48)) as pilot:
            await pilot.pause()
            app.split_form.ratio_input.value = "1.5"
            await pilot.click("#apply")
            await pilot.pause()
            assert app.cuts == [2, 2, 2]
            assert app.split_form.ratio_input.value == "1.5"

    asyncio.run(run())


def test_selecting_a_window_shows_its_stats():
    async def run():
        app = ReportApp(transformed=blockdense())
        async with app.run_test(size=(160, 48)) as pilot:
            app.query_one(TabbedContent).active = "tab_windows"
            await pilot.pause()
            app.window_table.move_cursor(row=1)
            app.window_table.action_select_cursor()
            await pilot.pause()
            assert app.stats_widget.data["Window"] == "1"
            assert app.stats_widget.data["Tiles (tile/scalar path)"] == "2 (2/0)"

    asyncio.run(run())
