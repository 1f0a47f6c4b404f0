"""Command-line front end: sgtk transform | spmm | sddmm | gcn | agnn | bench | verify | view."""

from __future__ import annotations

import io
import logging
import sys
from pathlib import Path

import click
import numpy as np
from rich.table import Table

from bench_service import KERNELS, BenchConfig, BenchReport, BenchService
from config import (
    AGNN_HIDDEN,
    DEFAULT_BLK_H,
    DEFAULT_BLK_W,
    DEFAULT_DIM,
    DEFAULT_REPEATS,
    DEFAULT_RUN_TIMEOUT_S,
    DEFAULT_SEED,
    DEFAULT_SPLIT,
    GCN_HIDDEN,
    GCN_LAYERS,
    THREADS_ENV,
    console,
    resolve_threads,
    setup_logging,
)
from dataset_service import SUITES, DatasetService, reference_block_count
from errors import SgtkError, VerificationError
from gnn_models import init_gcn_layers, save_weights
from graph_io import FORMATS, load_edge_list, normalize_graph
from sgt_transform import TileGeometry, block_stats, save_sgt, sgt_transform, window_stats
from tile_exec import Precision

logger = logging.getLogger(__name__)


def _geometry(blk_h: int | None, blk_w: int | None) -> TileGeometry | None:
    if blk_h is None and blk_w is None:
        return None
    return TileGeometry(blk_h or DEFAULT_BLK_H, blk_w or DEFAULT_BLK_W)


def _emit(report: BenchReport, emit: str, out: Path | None) -> None:
    if emit == "json":
        text = report.to_json() + "\n"
    else:
        buf = io.StringIO()
        report.write_csv(buf)
        text = buf.getvalue()
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text)
        logger.info("Wrote %d rows to %s", len(report.rows), out)


def _print_reference_counts(report: BenchReport, geometry: TileGeometry | None) -> None:
    if geometry not in (None, TileGeometry()):
        return
    table = Table("dataset", "tiles", "published", "delta", title="16x8 tile counts")
    seen = set()
    for row in report.rows:
        reference = reference_block_count(row.dataset)
        if reference is None or row.kernel != "spmm" or row.capacity != row.blocks * 128 or row.dataset in seen:
            continue
        seen.add(row.dataset)
        table.add_row(row.dataset, str(row.blocks), str(reference), f"{row.blocks - reference:+d}")
    if seen:
        console.print(table)


def _datasets(symmetrize: bool, self_loops: bool, no_dedupe: bool, threads: int) -> DatasetService:
    return DatasetService(symmetrize=symmetrize, add_self_loops=self_loops, dedupe=not no_dedupe, workers=threads)


def geometry_options(fn):
    fn = click.option("--blk-w", type=click.IntRange(min=1), default=None,
                      help=f"Tile width (default {DEFAULT_BLK_W}, or the SGT file's).")(fn)
    return click.option("--blk-h", type=click.IntRange(min=1), default=None,
                        help=f"Row window height (default {DEFAULT_BLK_H}, or the SGT file's).")(fn)


def normalize_options(fn):
    fn = click.option("--no-dedupe", is_flag=True, help="Keep duplicate edges.")(fn)
    fn = click.option("--self-loops", is_flag=True, help="Add missing self loops.")(fn)
    return click.option("--symmetrize", is_flag=True, help="Add missing reverse edges.")(fn)


def run_options(fn):
    for option in reversed([
        click.option("--split", type=click.FloatRange(0.0, 1.0), default=DEFAULT_SPLIT, show_default=True,
                     help="Share of each window's tiles on the dense-tile path."),
        click.option("--precision", type=click.Choice([p.value for p in Precision]),
                     default=Precision.EXACT_F32.value, show_default=True),
        click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True),
        click.option("--threads", type=click.IntRange(min=1), envvar=THREADS_ENV, default=None,
                     help=f"Worker threads (falls back to ${THREADS_ENV}, then 1)."),
        click.option("--repeats", type=click.IntRange(min=1), default=DEFAULT_REPEATS, show_default=True),
        click.option("--timeout", "timeout_s", type=click.FloatRange(min=0.0, min_open=True),
                     default=DEFAULT_RUN_TIMEOUT_S, show_default=True, help="Cap on one timed run, in seconds."),
        click.option("--emit", type=click.Choice(["csv", "json"]), default="csv", show_default=True),
        click.option("--check-oracle", is_flag=True,
                     help="Compare against the reference kernels; exit 1 past 1e-4."),
    ]):
        fn = option(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="Debug logging on stderr.")
def cli(verbose: bool) -> None:
    """Sparse graph tiling toolkit."""
    setup_logging(verbose)


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(FORMATS), default=None, help="Inferred from the suffix if omitted.")
@click.option("--remap-ids", is_flag=True, help="Compact sparse node ids.")
@normalize_options
@geometry_options
@click.option("--threads", type=click.IntRange(min=1), envvar=THREADS_ENV, default=None)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="SGT1 file to write.")
@click.option("--stats", is_flag=True,
              help="Print block accounting as key=value lines, plus the published count for known datasets.")
@click.option("--windows", is_flag=True, help="Print per-window tile statistics on stderr.")
def transform(input_path, fmt, remap_ids, symmetrize, self_loops, no_dedupe, blk_h, blk_w, threads,
              out, stats, windows) -> None:
    """Load a graph, transform it into dense tiles and optionally save it."""
    g = load_edge_list(input_path, format=fmt, remap_ids=remap_ids)
    g = normalize_graph(g, symmetrize=symmetrize, add_self_loops=self_loops, dedupe=not no_dedupe)
    geometry = _geometry(blk_h, blk_w) or TileGeometry()
    t = sgt_transform(g, geometry, resolve_threads(threads))
    if out is not None:
        save_sgt(t, out)
        logger.info("Wrote %r to %s", t, out)
    if stats:
        s = block_stats(t)
        click.echo(f"block_counter={s.block_counter}")
        click.echo(f"capacity={s.capacity}")
        click.echo(f"nnz={s.nnz}")
        click.echo(f"density={s.mean_tile_density:.6f}")
        reference = reference_block_count(str(input_path))
        if reference is not None and geometry == TileGeometry():
            click.echo(f"reference_blocks={reference}")
            click.echo(f"reference_delta={s.block_counter - reference:+d}")
    if windows:
        table = Table("window", "rows", "unique cols", "tiles", "nnz", "density", title=str(geometry))
        for ws in window_stats(t):
            table.add_row(str(ws.window), str(ws.rows), str(ws.unique_cols), str(ws.tiles),
                          str(ws.nnz), f"{ws.density:.3f}")
        console.print(table)


def _kernel_command(kernel: str, default_dim: int):
    @click.option("--graph", "dataset", required=True,
                  help="SGT file, edge-list file, or synthetic spec like random:n=256,p=0.02.")
    @normalize_options
    @geometry_options
    @click.option("--dim", type=click.IntRange(min=1), default=default_dim, show_default=True,
                  help="Feature width.")
    @run_options
    @click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
                  help="Report file (stdout if omitted).")
    @click.option("--save-output", type=click.Path(dir_okay=False, path_type=Path), default=None,
                  help="Write the kernel result as .npy.")
    def command(dataset, symmetrize, self_loops, no_dedupe, blk_h, blk_w, dim, split, precision, seed, threads,
                repeats, timeout_s, emit, check_oracle, out, save_output, **model) -> None:
        threads = resolve_threads(threads)
        cfg = BenchConfig(
            dataset=dataset,
            kernel=kernel,
            geometry=_geometry(blk_h, blk_w),
            split_ratio=split,
            precision=Precision(precision),
            dims=dim,
            repeats=repeats,
            seed=seed,
            threads=threads,
            check_oracle=check_oracle,
            timeout_s=timeout_s,
            **model,
        )
        service = BenchService(_datasets(symmetrize, self_loops, no_dedupe, threads))
        report, result = service.run_kernel(cfg)
        if save_output is not None:
            np.save(save_output, result)
        _emit(report, emit, out)
        if check_oracle:
            report.check()

    return command


cli.command("spmm", help="Hybrid tiled neighbor aggregation A @ X.")(_kernel_command("spmm", DEFAULT_DIM))
cli.command("sddmm", help="Hybrid tiled edge features value(e) * <x_row, y_col>.")(_kernel_command("sddmm", DEFAULT_DIM))
cli.command("gcn", help="GCN forward pass (self loops and symmetric normalization applied).")(
    click.option("--layers", "num_layers", type=click.IntRange(min=1), default=None, help="Default 2.")(
        click.option("--hidden", type=click.IntRange(min=1), default=GCN_HIDDEN, show_default=True)(
            click.option("--weights", type=click.Path(exists=True, dir_okay=False), default=None,
                         help="Weight file written by `init-weights`.")(
                _kernel_command("gcn", DEFAULT_DIM)
            )
        )
    )
)
cli.command("agnn", help="AGNN forward pass (cosine attention propagation).")(
    click.option("--layers", "num_layers", type=click.IntRange(min=1), default=None, help="Default 4.")(
        _kernel_command("agnn", AGNN_HIDDEN)
    )
)


@cli.command("init-weights")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--in-dim", type=click.IntRange(min=1), default=DEFAULT_DIM, show_default=True)
@click.option("--out-dim", type=click.IntRange(min=1), default=DEFAULT_DIM, show_default=True)
@click.option("--hidden", type=click.IntRange(min=1), default=GCN_HIDDEN, show_default=True)
@click.option("--layers", "num_layers", type=click.IntRange(min=1), default=GCN_LAYERS, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
def init_weights(out, in_dim, out_dim, hidden, num_layers, seed) -> None:
    """Write seeded uniform [-0.1, 0.1] GCN weights."""
    save_weights(out, init_gcn_layers(in_dim, out_dim, hidden=hidden, num_layers=num_layers, seed=seed))


@cli.command()
@click.option("--suite", "suites", multiple=True, type=click.Choice(sorted(SUITES)), help="Named dataset group.")
@click.option("--dataset", "extra", multiple=True, help="Extra dataset (file or synthetic spec).")
@click.option("--kernel", "kernels", multiple=True, type=click.Choice(KERNELS), help="Default: spmm and sddmm.")
@normalize_options
@geometry_options
@click.option("--dim", type=click.IntRange(min=1), default=DEFAULT_DIM, show_default=True)
@run_options
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--history", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="sqlite file every row is appended to.")
def bench(suites, extra, kernels, symmetrize, self_loops, no_dedupe, blk_h, blk_w, dim, split, precision, seed,
          threads, repeats, timeout_s, emit, check_oracle, out, history) -> None:
    """Time the tile path, the scalar path and the hybrid split per dataset and kernel."""
    names = DatasetService.expand(list(suites) + list(extra))
    if not names:
        raise click.UsageError("give at least one --suite or --dataset")
    threads = resolve_threads(threads)
    service = BenchService(_datasets(symmetrize, self_loops, no_dedupe, threads), history_path=history)
    try:
        report = service.run_many(
            BenchConfig(
                dataset=name,
                kernel=kernel,
                geometry=_geometry(blk_h, blk_w),
                split_ratio=split,
                precision=Precision(precision),
                dims=dim,
                repeats=repeats,
                seed=seed,
                threads=threads,
                check_oracle=check_oracle,
                timeout_s=timeout_s,
            )
            for name in names
            for kernel in (kernels or ("spmm", "sddmm"))
        )
    finally:
        service.close()
    _emit(report, emit, out)
    _print_reference_counts(report, _geometry(blk_h, blk_w))
    if check_oracle:
        report.check()


@cli.command()
@click.option("--count", type=click.IntRange(min=1), default=20, show_default=True, help="Random instances.")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--max-nodes", type=click.IntRange(min=1), default=512, show_default=True)
@geometry_options
@click.option("--threads", type=click.IntRange(min=1), envvar=THREADS_ENV, default=8, show_default=True,
              help=f"Worker count compared against one worker (falls back to ${THREADS_ENV}).")
def verify(count, seed, max_nodes, blk_h, blk_w, threads) -> None:
    """Check the kernels against the references on random graphs."""
    results = BenchService().verify(count=count, seed=seed, max_nodes=max_nodes,
                                    geometry=_geometry(blk_h, blk_w), threads=threads)
    table = Table("check", "instances", "worst", "status", "detail")
    for r in results:
        status = "[green]ok[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.check, str(r.instances), f"{r.worst:.3e}", status, r.detail)
    console.print(table)
    failed = [r for r in results if not r.passed]
    if failed:
        worst = failed[0]
        raise VerificationError(f"{len(failed)} check(s) failed, first: {worst.check} {worst.worst:.3e} ({worst.detail})")


@cli.command()
@click.option("--report", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="CSV written by bench.")
@click.option("--history", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="sqlite history written by bench --history.")
@click.option("--graph", "dataset", default=None, help="SGT file, edge list or synthetic spec to inspect.")
@geometry_options
def view(report, history, dataset, blk_h, blk_w) -> None:
    """Browse bench reports and per-window tile statistics."""
    from app import ReportApp

    rows = []
    if report is not None:
        with report.open(newline="") as fh:
            rows.extend(BenchReport.read_csv(fh).rows)
    if history is not None:
        service = BenchService(history_path=history)
        rows.extend(service.get_history())
        service.close()
    t = DatasetService().get_transform(dataset, _geometry(blk_h, blk_w)) if dataset else None
    ReportApp(rows=rows, transformed=t).run()


def cli_main(argv: list[str] | None = None) -> int:
    """Run the CLI; 0 on success, 1 on a verification failure, 2 on usage or input errors."""
    try:
        rv = cli.main(args=argv, prog_name="sgtk", standalone_mode=False)
    except VerificationError as exc:
        console.print(f"[red]verification failed:[/red] {exc}")
        return 1
    except click.exceptions.Abort:
        console.print("Aborted.")
        return 2
    except click.ClickException as exc:
        exc.show()
        return 2
    except SgtkError as exc:
        console.print(f"[red]error:[/red] {exc}")
        return 2
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(cli_main())
