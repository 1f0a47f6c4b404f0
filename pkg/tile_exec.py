"""Hybrid tiled SpMM and SDDMM over a transformed graph.

Each row window's tiles are split by a :class:`HybridSplitPlan`: tiles below
the window's cut run on the dense-tile path (gather a blk_h x blk_w tile and
the matching rows of the feature matrix, then a small dense product), the
rest run on the scalar path (one multiply-add per edge). Both paths read the
same edge-to-row / edge-to-column maps, and their partial results are summed.

Windows write disjoint output rows (SpMM) or disjoint edge ranges (SDDMM), so
they are spread over worker threads without locks; the arithmetic inside a
window never depends on the worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from config import DEFAULT_SPLIT, SDDMM_BLK_W
from errors import NonFiniteError, RangeError, ShapeError, TileIndexError
from sgt_transform import TransformedGraph, reblock

logger = logging.getLogger(__name__)

TF32_DROPPED_BITS = 13  # float32 keeps 23 mantissa bits, tf32 keeps 10
_TF32_MASK = np.uint32(0xFFFFFFFF ^ ((1 << TF32_DROPPED_BITS) - 1))
_TF32_HALF = np.uint32((1 << (TF32_DROPPED_BITS - 1)) - 1)


class Precision(str, Enum):
    EXACT_F32 = "fp32"
    TF32 = "tf32"


@dataclass(frozen=True, eq=False)
class HybridSplitPlan:
    """Tiles with index < per_window_tile_cut[w] take the dense-tile path."""

    ratio: float
    per_window_tile_cut: np.ndarray
    # tile width the cut was computed for; 0 when built by hand
    blk_w: int = 0

    def tile_path_blocks(self) -> int:
        return int(self.per_window_tile_cut.sum())


def as_dense(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite row-major float32 2-D array."""
    arr = np.ascontiguousarray(m, dtype=np.float32)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def tf32_round(m) -> np.ndarray:
    """Round float32 mantissas to 10 explicit bits, ties to even."""
    arr = np.array(m, dtype=np.float32, copy=True)
    bits = arr.view(np.uint32)
    lsb = (bits >> np.uint32(TF32_DROPPED_BITS)) & np.uint32(1)
    bits += _TF32_HALF + lsb
    bits &= _TF32_MASK
    return arr


def make_split_plan(t: TransformedGraph, ratio: float = DEFAULT_SPLIT) -> HybridSplitPlan:
    if not 0.0 <= ratio <= 1.0:
        raise RangeError(f"split ratio must be in [0, 1], got {ratio}")
    cut = np.floor(ratio * t.block_partition).astype(np.int64)
    return HybridSplitPlan(float(ratio), cut, t.geometry.blk_w)


def _resolve_plan(t: TransformedGraph, plan: HybridSplitPlan | None) -> HybridSplitPlan:
    if plan is None:
        return make_split_plan(t)
    cut = plan.per_window_tile_cut
    stale = plan.blk_w not in (0, t.geometry.blk_w) or cut.shape != t.block_partition.shape
    if stale or np.any(cut > t.block_partition):
        # plan was made for another tile width; keep its ratio
        logger.debug("Rebuilding split plan (ratio=%s) for geometry %s", plan.ratio, t.geometry)
        return make_split_plan(t, plan.ratio)
    return plan


def _run_windows(num_windows: int, fn: Callable[[int, int], None], workers: int) -> None:
    workers = max(1, min(workers, num_windows))
    if workers == 1:
        fn(0, num_windows)
        return
    bounds = np.linspace(0, num_windows, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for future in [pool.submit(fn, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]:
            future.result()


def _tile_x_index(t: TransformedGraph, window: int, first_tile: int, num_tiles: int) -> np.ndarray:
    """Original column ids of tiles [first_tile, first_tile + num_tiles); ragged lanes hold num_nodes."""
    bw = t.geometry.blk_w
    index = np.full(num_tiles * bw, t.num_nodes, dtype=np.int64)
    cols = t.window_cols(window)[first_tile * bw:(first_tile + num_tiles) * bw]
    index[:cols.size] = cols
    return index


def gather_tile(t: TransformedGraph, window: int, tile: int) -> tuple[np.ndarray, np.ndarray]:
    """Materialize one blk_h x blk_w tile and its feature-row index.

    Absent positions are zero; lanes past the window's last unique column
    carry the sentinel ``num_nodes``, whose feature row is all zeros.
    """
    if not 0 <= window < t.num_windows:
        raise TileIndexError(f"window {window} out of range [0, {t.num_windows})")
    if not 0 <= tile < t.block_partition[window]:
        raise TileIndexError(f"tile {tile} out of range [0, {t.block_partition[window]}) in window {window}")
    bh, bw = t.geometry.blk_h, t.geometry.blk_w
    e0, e1 = t.window_edges(window)
    ccol = t.edge_to_column[e0:e1]
    sel = ccol // bw == tile
    a_tile = np.zeros((bh, bw), dtype=np.float32)
    np.add.at(
        a_tile,
        (t.edge_to_row[e0:e1][sel] - window * bh, ccol[sel] % bw),
        t.csr.edge_values()[e0:e1][sel],
    )
    return a_tile, _tile_x_index(t, window, tile, 1)


def _operands(t: TransformedGraph, prec: Precision, *mats: np.ndarray):
    """Edge values and zero-sentinel-padded feature matrices, tf32-rounded on request."""
    values = t.csr.edge_values()
    if prec == Precision.TF32:
        values = tf32_round(values)
        mats = tuple(tf32_round(m) for m in mats)
    padded = []
    for m in mats:
        p = np.zeros((m.shape[0] + 1, m.shape[1]), dtype=np.float32)
        p[:-1] = m
        padded.append(p)
    return values, padded


def spmm_hybrid(
    t: TransformedGraph,
    x,
    plan: HybridSplitPlan | None = None,
    prec: Precision = Precision.EXACT_F32,
    workers: int = 1,
) -> np.ndarray:
    """Neighbor aggregation ``A @ x`` over dense tiles plus scalar leftovers.

    The feature width is zero-padded to a multiple of blk_h internally and
    stripped again on output.
    """
    x = as_dense(x, "x")
    n = t.num_nodes
    if x.shape[0] != n:
        raise ShapeError(f"x has {x.shape[0]} rows, graph has {n} nodes")
    plan = _resolve_plan(t, plan)
    bh, bw = t.geometry.blk_h, t.geometry.blk_w
    dim = x.shape[1]
    width = -(-dim // bh) * bh
    if n == 0 or dim == 0:
        return np.zeros((n, dim), dtype=np.float32)

    wide = np.zeros((n, width), dtype=np.float32)
    wide[:, :dim] = x
    values, (x_pad,) = _operands(t, Precision(prec), wide)
    out = np.zeros((t.num_windows * bh, width), dtype=np.float32)
    cuts = plan.per_window_tile_cut

    def run(w_lo: int, w_hi: int) -> None:
        for w in range(w_lo, w_hi):
            e0, e1 = t.window_edges(w)
            if e0 == e1:
                continue
            cut = int(cuts[w])
            ccol = t.edge_to_column[e0:e1]
            lrow = t.edge_to_row[e0:e1] - w * bh
            tile_of = ccol // bw
            v = values[e0:e1]
            acc = out[w * bh:(w + 1) * bh]

            on_tiles = tile_of < cut
            if cut:
                # the window's first `cut` tiles side by side: one bh x (cut * bw) block
                a = np.zeros((bh, cut * bw), dtype=np.float32)
                np.add.at(a, (lrow[on_tiles], ccol[on_tiles]), v[on_tiles])
                acc += a @ x_pad[_tile_x_index(t, w, 0, cut)]

            scalar = ~on_tiles
            if scalar.any():
                cols = t.window_cols(w)[ccol[scalar]]
                np.add.at(acc, lrow[scalar], v[scalar, None] * x_pad[cols])

    _run_windows(t.num_windows, run, workers)
    result = out[:n, :dim]
    if not np.all(np.isfinite(result)):
        raise NonFiniteError("spmm produced NaN or Inf")
    logger.debug("spmm %dx%d, %d/%d blocks on tile path", n, dim, plan.tile_path_blocks(), t.block_counter)
    return np.ascontiguousarray(result)


def sddmm_hybrid(
    t: TransformedGraph,
    x,
    y,
    plan: HybridSplitPlan | None = None,
    prec: Precision = Precision.EXACT_F32,
    workers: int = 1,
) -> np.ndarray:
    """Edge features ``value(e) * dot(x[row(e)], y[col(e)])`` aligned with edge_list.

    Runs on 16-wide tiles; *t* is reblocked if it has another width. Tile-path
    products cover whole tiles but only non-zero positions are written back.
    """
    x = as_dense(x, "x")
    y = as_dense(y, "y")
    n = t.num_nodes
    if x.shape[0] != n or y.shape[0] != n:
        raise ShapeError(f"x/y rows ({x.shape[0]}, {y.shape[0]}) must equal num_nodes={n}")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"x and y widths differ: {x.shape[1]} vs {y.shape[1]}")
    if t.geometry.blk_w != SDDMM_BLK_W:
        t = reblock(t, SDDMM_BLK_W)
    plan = _resolve_plan(t, plan)
    bh, bw = t.geometry.blk_h, t.geometry.blk_w
    dim = x.shape[1]
    out = np.zeros(t.num_edges, dtype=np.float32)
    if t.num_edges == 0:
        return out

    values, (x_pad, y_pad) = _operands(t, Precision(prec), x, y)
    cuts = plan.per_window_tile_cut

    def run(w_lo: int, w_hi: int) -> None:
        for w in range(w_lo, w_hi):
            e0, e1 = t.window_edges(w)
            if e0 == e1:
                continue
            cut = int(cuts[w])
            r0, r1 = t.window_rows(w)
            xw = np.zeros((bh, dim), dtype=np.float32)
            xw[:r1 - r0] = x_pad[r0:r1]
            ccol = t.edge_to_column[e0:e1]
            lrow = t.edge_to_row[e0:e1] - w * bh
            tile_of = ccol // bw
            seg = out[e0:e1]

            on_tiles = tile_of < cut
            if cut:
                scores = xw @ y_pad[_tile_x_index(t, w, 0, cut)].T
                seg[on_tiles] = values[e0:e1][on_tiles] * scores[lrow[on_tiles], ccol[on_tiles]]

            scalar = ~on_tiles
            if scalar.any():
                cols = t.window_cols(w)[ccol[scalar]]
                seg[scalar] = values[e0:e1][scalar] * (xw[lrow[scalar]] * y_pad[cols]).sum(axis=-1)

    _run_windows(t.num_windows, run, workers)
    logger.debug("sddmm %d edges x %d, %d/%d blocks on tile path",
                 t.num_edges, dim, plan.tile_path_blocks(), t.block_counter)
    return out
