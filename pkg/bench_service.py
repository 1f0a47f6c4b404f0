from __future__ import annotations

import csv
import json
import logging
import sqlite3
import statistics
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, TextIO

import numpy as np

from config import (
    AGNN_LAYERS,
    CSV_HEADER,
    DEFAULT_REPEATS,
    DEFAULT_RUN_TIMEOUT_S,
    DEFAULT_SPLIT,
    GCN_HIDDEN,
    GCN_LAYERS,
    ORACLE_RTOL,
    SDDMM_BLK_W,
    SOFTMAX_ATOL,
)
from dataset_service import DatasetService, RandomSpec, make_synthetic
from errors import BenchTimeoutError, RangeError, ShapeError, VerificationError
from gnn_models import agnn_forward, edge_softmax, gcn_forward, init_agnn_layers, init_gcn_layers, load_weights
from graph_io import gcn_normalize_values, normalize_graph
from oracle import max_rel_err, oracle_agnn, oracle_gcn, oracle_sddmm, oracle_spmm, worst_offender
from sgt_transform import TileGeometry, block_stats, reblock, reconstruct_edges, sgt_transform
from tile_exec import Precision, make_split_plan, sddmm_hybrid, spmm_hybrid

logger = logging.getLogger(__name__)

KERNELS = ("spmm", "sddmm", "gcn", "agnn")
PATHS = (("tile", 1.0), ("scalar", 0.0))


@dataclass(frozen=True)
class BenchConfig:
    dataset: str
    kernel: str = "spmm"
    # None keeps the geometry an SGT file was written with, else 16x8
    geometry: TileGeometry | None = None
    split_ratio: float = DEFAULT_SPLIT
    precision: Precision = Precision.EXACT_F32
    dims: int = 16
    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    threads: int = 1
    check_oracle: bool = False
    timeout_s: float = DEFAULT_RUN_TIMEOUT_S
    # model kernels only: layer count, hidden width, GCN weight file
    num_layers: int | None = None
    hidden: int = GCN_HIDDEN
    weights: str | None = None

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise RangeError(f"unknown kernel {self.kernel!r}; expected one of {', '.join(KERNELS)}")
        if self.repeats < 1 or self.dims < 1:
            raise RangeError("repeats and dims must be at least 1")
        if not 0.0 <= self.split_ratio <= 1.0:
            raise RangeError(f"split ratio must be in [0, 1], got {self.split_ratio}")


@dataclass
class BenchRow:
    dataset: str
    kernel: str
    path: str
    median_ms: float
    blocks: int
    capacity: int
    nnz: int
    density: float
    max_rel_err: float | None = None
    # (index, got, expected) of the largest oracle disagreement; not part of the CSV
    worst: tuple | None = field(default=None, repr=False)

    def csv_fields(self) -> list[str]:
        err = "" if self.max_rel_err is None else f"{self.max_rel_err:.3e}"
        return [self.dataset, self.kernel, self.path, f"{self.median_ms:.4f}", str(self.blocks),
                str(self.capacity), str(self.nnz), f"{self.density:.6f}", err]


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def extend(self, other: "BenchReport") -> None:
        self.rows.extend(other.rows)

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.csv_fields())

    def to_json(self) -> str:
        return json.dumps([{k: v for k, v in asdict(r).items() if k != "worst"} for r in self.rows], indent=2)

    def failures(self, tol: float = ORACLE_RTOL) -> list[BenchRow]:
        return [r for r in self.rows if r.max_rel_err is not None and r.max_rel_err > tol]

    def check(self, tol: float = ORACLE_RTOL) -> None:
        """Raise VerificationError for the worst row over *tol*."""
        failed = self.failures(tol)
        if not failed:
            return
        worst = max(failed, key=lambda r: r.max_rel_err)
        index, got, expected = worst.worst or (None, None, None)
        raise VerificationError(
            f"{worst.dataset}/{worst.kernel}/{worst.path}: max_rel_err {worst.max_rel_err:.3e} > {tol:g}",
            index, got, expected,
        )

    @classmethod
    def read_csv(cls, fh: TextIO) -> "BenchReport":
        report = cls()
        for rec in csv.DictReader(fh):
            report.rows.append(BenchRow(
                rec["dataset"], rec["kernel"], rec["path"], float(rec["median_ms"]),
                int(rec["blocks"]), int(rec["capacity"]), int(rec["nnz"]), float(rec["density"]),
                float(rec["max_rel_err"]) if rec.get("max_rel_err") else None,
            ))
        return report


@dataclass
class VerifyResult:
    check: str
    instances: int
    worst: float
    passed: bool
    detail: str = ""


class BenchService:
    def __init__(self, datasets: DatasetService | None = None, history_path: str | Path | None = None) -> None:
        self.datasets = datasets or DatasetService()
        self.history: list[BenchRow] = []
        self.db_conn: sqlite3.Connection | None = None
        if history_path is not None:
            self.db_conn = sqlite3.connect(str(history_path))
            self._prepare_database()
            self._load_history_from_db()

    def _prepare_database(self) -> None:
        cur = self.db_conn.cursor()
        cur.execute(
            """
            CREATE TABLE IF NOT EXISTS runs (
                dataset TEXT,
                kernel TEXT,
                path TEXT,
                median_ms REAL,
                blocks INTEGER,
                capacity INTEGER,
                nnz INTEGER,
                density REAL,
                max_rel_err REAL,
                ts DATETIME DEFAULT CURRENT_TIMESTAMP
            )
            """
        )
        self.db_conn.commit()

    def _load_history_from_db(self) -> None:
        cur = self.db_conn.cursor()
        for row in cur.execute(
            "SELECT dataset,kernel,path,median_ms,blocks,capacity,nnz,density,max_rel_err FROM runs ORDER BY ts, rowid"
        ):
            self.history.append(BenchRow(*row))

    def _insert_run(self, row: BenchRow) -> None:
        cur = self.db_conn.cursor()
        cur.execute(
            """
            INSERT INTO runs (dataset, kernel, path, median_ms, blocks, capacity, nnz, density, max_rel_err)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
            """,
            (row.dataset, row.kernel, row.path, row.median_ms, row.blocks,
             row.capacity, row.nnz, row.density, row.max_rel_err),
        )
        self.db_conn.commit()

    def get_history(self) -> list[BenchRow]:
        """Rows of every report run by this service, including persisted ones."""
        return self.history

    def close(self) -> None:
        if self.db_conn is not None:
            self.db_conn.close()
            self.db_conn = None

    @staticmethod
    def _timed(fn: Callable[[], np.ndarray], repeats: int, timeout_s: float) -> tuple[float, np.ndarray]:
        """Median wall time in ms over *repeats* runs after one warm-up run.

        Each run executes on a daemon thread; a run past *timeout_s* is
        abandoned and never keeps the process alive.
        """
        def once() -> tuple[float, np.ndarray]:
            box: dict[str, object] = {}

            def target() -> None:
                try:
                    start = time.perf_counter()
                    out = fn()
                    box["result"] = ((time.perf_counter() - start) * 1e3, out)
                except BaseException as exc:  # re-raised on the caller's thread
                    box["error"] = exc

            worker = threading.Thread(target=target, name="sgtk-timed-run", daemon=True)
            worker.start()
            worker.join(timeout_s)
            if worker.is_alive():
                raise BenchTimeoutError(f"run exceeded {timeout_s:g}s")
            if "error" in box:
                raise box["error"]
            return box["result"]

        samples: list[float] = []
        result = None
        for k in range(repeats + 1):
            elapsed, result = once()
            if k:
                samples.append(elapsed)
        return statistics.median(samples), result

    def _kernel_runner(self, cfg: BenchConfig):
        """Return (transformed graph the kernel runs on, run(ratio) callable, oracle callable)."""
        t = self.datasets.get_transform(cfg.dataset, cfg.geometry)
        rng = np.random.default_rng(cfg.seed)
        n = t.num_nodes
        x = rng.uniform(-1.0, 1.0, size=(n, cfg.dims)).astype(np.float32)
        prec, workers = cfg.precision, cfg.threads

        if cfg.kernel == "spmm":
            return t, lambda r: spmm_hybrid(t, x, make_split_plan(t, r), prec, workers), \
                lambda: oracle_spmm(t.csr, x)

        if cfg.kernel == "sddmm":
            t16 = reblock(t, SDDMM_BLK_W)
            y = rng.uniform(-1.0, 1.0, size=(n, cfg.dims)).astype(np.float32)
            return t16, lambda r: sddmm_hybrid(t16, x, y, make_split_plan(t16, r), prec, workers), \
                lambda: oracle_sddmm(t.csr, x, y)

        if cfg.kernel == "gcn":
            g = gcn_normalize_values(normalize_graph(t.csr, add_self_loops=True))
            tg = sgt_transform(g, t.geometry, workers)
            if cfg.weights is not None:
                layers = load_weights(cfg.weights)
                if layers and layers[0].in_dim != cfg.dims:
                    raise ShapeError(f"weights expect input width {layers[0].in_dim}, --dim is {cfg.dims}")
            else:
                layers = init_gcn_layers(cfg.dims, cfg.dims, hidden=cfg.hidden,
                                         num_layers=cfg.num_layers or GCN_LAYERS, seed=cfg.seed)
            return tg, lambda r: gcn_forward(tg, x, layers, make_split_plan(tg, r), prec, workers), \
                lambda: oracle_gcn(g, x, layers)

        layers = init_agnn_layers(cfg.num_layers or AGNN_LAYERS)
        return t, lambda r: agnn_forward(t, x, layers, make_split_plan(t, r), prec, workers), \
            lambda: oracle_agnn(t.csr, x, [l.beta for l in layers])

    def _measure(self, cfg: BenchConfig, label: str, ratio: float, run, stats, expected) -> tuple[BenchRow, np.ndarray]:
        median_ms, out = self._timed(lambda: run(ratio), cfg.repeats, cfg.timeout_s)
        row = BenchRow(cfg.dataset, cfg.kernel, label, median_ms, stats.block_counter,
                       stats.capacity, stats.nnz, stats.mean_tile_density)
        if expected is not None:
            row.max_rel_err = max_rel_err(out, expected)
            row.worst = worst_offender(out, expected)
        logger.info("%s %s %s: %.3f ms", cfg.dataset, cfg.kernel, label, median_ms)
        return row, out

    def _record(self, report: BenchReport) -> None:
        for row in report.rows:
            self.history.append(row)
            if self.db_conn is not None:
                self._insert_run(row)

    def run_bench(self, cfg: BenchConfig) -> BenchReport:
        """Time the tile path, the scalar path and the configured hybrid split."""
        t, run, oracle = self._kernel_runner(cfg)
        stats = block_stats(t)
        expected = oracle() if cfg.check_oracle else None
        report = BenchReport()
        for label, ratio in (*PATHS, ("hybrid", cfg.split_ratio)):
            row, _ = self._measure(cfg, label, ratio, run, stats, expected)
            report.rows.append(row)
        self._record(report)
        return report

    def run_kernel(self, cfg: BenchConfig) -> tuple[BenchReport, np.ndarray]:
        """Run only the configured split; returns its one-row report and the kernel output."""
        t, run, oracle = self._kernel_runner(cfg)
        expected = oracle() if cfg.check_oracle else None
        row, out = self._measure(cfg, "hybrid", cfg.split_ratio, run, block_stats(t), expected)
        report = BenchReport([row])
        self._record(report)
        return report, out

    def run_many(self, configs: Iterable[BenchConfig]) -> BenchReport:
        report = BenchReport()
        for cfg in configs:
            report.extend(self.run_bench(cfg))
        return report

    def verify(
        self,
        count: int = 20,
        seed: int = 0,
        max_nodes: int = 512,
        max_density: float = 0.05,
        geometry: TileGeometry | None = None,
        threads: int = 8,
        dims: Iterable[int] = (8, 16, 32, 64),
    ) -> list[VerifyResult]:
        """Check oracle equivalence, split invariance, reconstruction, block
        accounting, softmax normalization and thread-count determinism on
        *count* random graphs."""
        geometry = geometry or TileGeometry()
        dims = tuple(dims)
        rng = np.random.default_rng(seed)
        worst: dict[str, float] = {}
        details: dict[str, str] = {}

        def record(name: str, err: float, detail: str = "") -> None:
            if err >= worst.get(name, -1.0):
                worst[name] = err
                if detail:
                    details[name] = detail

        for k in range(count):
            n = int(rng.integers(1, max_nodes + 1))
            p = float(rng.uniform(0.0, max_density))
            g = make_synthetic(RandomSpec(n, p, seed=int(rng.integers(2**31))))
            g = g.with_values(rng.uniform(0.5, 1.5, size=g.num_edges).astype(np.float32))
            dim = dims[k % len(dims)]
            x = rng.uniform(-1.0, 1.0, size=(n, dim)).astype(np.float32)
            y = rng.uniform(-1.0, 1.0, size=(n, dim)).astype(np.float32)

            t = sgt_transform(g, geometry)
            t16 = reblock(t, SDDMM_BLK_W)
            rows, cols = reconstruct_edges(t)
            same = np.array_equal(rows, g.row_of_edges()) and np.array_equal(cols, g.edge_list)
            record("reconstruction", 0.0 if same else 1.0, "" if same else f"instance {k}")
            stats = block_stats(t)
            ok = stats.capacity == t.block_counter * geometry.tile_size
            record("block-accounting", 0.0 if ok else 1.0, "" if ok else f"instance {k}")

            ref_spmm = oracle_spmm(g, x)
            ref_sddmm = oracle_sddmm(g, x, y)
            outs_spmm, outs_sddmm = [], []
            for ratio in (0.0, 0.25, 0.5, 1.0):
                a = spmm_hybrid(t, x, make_split_plan(t, ratio))
                b = sddmm_hybrid(t16, x, y, make_split_plan(t16, ratio))
                record("oracle-spmm", max_rel_err(a, ref_spmm), f"instance {k}, split {ratio}")
                record("oracle-sddmm", max_rel_err(b, ref_sddmm), f"instance {k}, split {ratio}")
                outs_spmm.append(a)
                outs_sddmm.append(b)
            for a, b in zip(outs_spmm, outs_spmm[1:]):
                record("split-invariance", max_rel_err(a, b), f"instance {k}")
            for a, b in zip(outs_sddmm, outs_sddmm[1:]):
                record("split-invariance", max_rel_err(a, b), f"instance {k}")

            softmax = edge_softmax(g, ref_sddmm)
            row_sums = np.add.reduceat(softmax.astype(np.float64), g.node_pointer[:-1][g.degrees() > 0]) \
                if g.num_edges else np.ones(1)
            record("softmax-rows", float(np.abs(row_sums - 1.0).max()), f"instance {k}")

            half = make_split_plan(t, 0.5)
            t_many = sgt_transform(g, geometry, workers=threads)
            identical = (
                np.array_equal(t_many.edge_to_column, t.edge_to_column)
                and np.array_equal(t_many.window_unique_cols, t.window_unique_cols)
                and np.array_equal(spmm_hybrid(t, x, half, workers=1), spmm_hybrid(t, x, half, workers=threads))
                and np.array_equal(sddmm_hybrid(t16, x, y, workers=1), sddmm_hybrid(t16, x, y, workers=threads))
            )
            record("determinism", 0.0 if identical else 1.0, "" if identical else f"instance {k}")

        limits = {"softmax-rows": SOFTMAX_ATOL, "reconstruction": 0.0, "block-accounting": 0.0,
                  "determinism": 0.0}
        return [
            VerifyResult(name, count, err, err <= limits.get(name, ORACLE_RTOL), details.get(name, ""))
            for name, err in worst.items()
        ]


def run_bench(cfg: BenchConfig, service: BenchService | None = None) -> BenchReport:
    return (service or BenchService()).run_bench(cfg)
