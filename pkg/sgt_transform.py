"""Sparse graph transformation: compress row windows into dense tiles.

Each band of ``blk_h`` rows (a row window) gathers the sorted unique column
ids of its edges; those compressed columns are cut into ``blk_w``-wide tiles.
Every edge is mapped to its (row, compressed column) coordinate so the
kernels can scatter it into a tile without searching.
"""

from __future__ import annotations

import dataclasses
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config import DEFAULT_BLK_H, DEFAULT_BLK_W
from errors import FormatError, GeometryError, GraphIOError, ShapeError
from graph_io import CsrGraph

logger = logging.getLogger(__name__)

SGT1_MAGIC = b"SGT1"
# magic, blk_h, blk_w, flags, num_nodes, num_edges, num_windows, block_counter
SGT1_HEADER = struct.Struct("<4sIIBQQQQ")
FLAG_VALUES = 0x01


@dataclass(frozen=True)
class TileGeometry:
    blk_h: int = DEFAULT_BLK_H
    blk_w: int = DEFAULT_BLK_W

    def __post_init__(self) -> None:
        if self.blk_h < 1 or self.blk_w < 1:
            raise GeometryError(f"tile geometry must be positive, got {self.blk_h}x{self.blk_w}")

    @property
    def tile_size(self) -> int:
        return self.blk_h * self.blk_w

    def __str__(self) -> str:
        return f"{self.blk_h}x{self.blk_w}"


@dataclass(frozen=True, eq=False)
class TransformedGraph:
    """Output of :func:`sgt_transform`; immutable and shareable across threads.

    ``edge_to_column`` holds window-relative compressed ids, so the tile of an
    edge is ``id // blk_w`` and its lane ``id % blk_w`` for any tile width.
    ``window_unique_cols[window_offsets[w]:window_offsets[w + 1]]`` are the
    sorted unique neighbor ids of window ``w``.
    """

    csr: CsrGraph
    geometry: TileGeometry
    edge_to_row: np.ndarray
    edge_to_column: np.ndarray
    block_partition: np.ndarray
    window_offsets: np.ndarray
    window_unique_cols: np.ndarray
    block_counter: int

    @property
    def num_nodes(self) -> int:
        return self.csr.num_nodes

    @property
    def num_edges(self) -> int:
        return self.csr.num_edges

    @property
    def num_windows(self) -> int:
        return int(self.block_partition.shape[0])

    def window_rows(self, window: int) -> tuple[int, int]:
        start = window * self.geometry.blk_h
        return start, min(start + self.geometry.blk_h, self.num_nodes)

    def window_edges(self, window: int) -> tuple[int, int]:
        """Edge id range [start, stop) of a window; CSR rows are contiguous."""
        r0, r1 = self.window_rows(window)
        return int(self.csr.node_pointer[r0]), int(self.csr.node_pointer[r1])

    def window_cols(self, window: int) -> np.ndarray:
        return self.window_unique_cols[self.window_offsets[window]:self.window_offsets[window + 1]]

    def with_values(self, values: np.ndarray | None) -> "TransformedGraph":
        """Same structure, different edge values (e.g. attention weights)."""
        return dataclasses.replace(self, csr=self.csr.with_values(values))

    def __repr__(self) -> str:
        return (
            f"TransformedGraph(nodes={self.num_nodes}, edges={self.num_edges}, "
            f"geometry={self.geometry}, windows={self.num_windows}, blocks={self.block_counter})"
        )


@dataclass(frozen=True)
class BlockStats:
    block_counter: int
    capacity: int
    nnz: int
    mean_tile_density: float


@dataclass(frozen=True)
class WindowStats:
    window: int
    rows: int
    unique_cols: int
    tiles: int
    nnz: int
    density: float


def _tiles_for(unique_counts: np.ndarray, blk_w: int) -> np.ndarray:
    return (unique_counts + blk_w - 1) // blk_w


def _transform_windows(g: CsrGraph, edge_to_row: np.ndarray, blk_h: int, w_lo: int, w_hi: int):
    """Compress windows [w_lo, w_hi); returns (unique cols, per-window counts, edge_to_column)."""
    n = g.num_nodes
    e0 = int(g.node_pointer[w_lo * blk_h])
    e1 = int(g.node_pointer[min(w_hi * blk_h, n)])
    local_window = edge_to_row[e0:e1] // blk_h - w_lo
    keys = local_window * n + g.edge_list[e0:e1]
    unique_keys, inverse = np.unique(keys, return_inverse=True)
    counts = np.bincount(unique_keys // n, minlength=w_hi - w_lo)
    offsets = np.zeros(w_hi - w_lo + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    edge_to_column = inverse.reshape(-1) - offsets[local_window]
    return unique_keys % n, counts, edge_to_column


def sgt_transform(g: CsrGraph, geom: TileGeometry | None = None, workers: int = 1) -> TransformedGraph:
    """Transform a CSR graph into row windows of dense tiles.

    Windows are independent, so they are split into contiguous chunks handled
    by *workers* threads and merged in window order; the result does not
    depend on the worker count.
    """
    geom = geom or TileGeometry()
    if geom.blk_h < 1 or geom.blk_w < 1:
        raise GeometryError(f"tile geometry must be positive, got {geom}")
    n = g.num_nodes
    num_windows = -(-n // geom.blk_h)
    edge_to_row = g.row_of_edges()

    if num_windows == 0:
        empty = np.zeros(0, dtype=np.int64)
        return TransformedGraph(g, geom, edge_to_row, empty, empty, np.zeros(1, dtype=np.int64), empty, 0)

    bounds = np.linspace(0, num_windows, min(max(1, workers), num_windows) + 1).astype(int)
    chunks = list(zip(bounds[:-1], bounds[1:]))
    if len(chunks) == 1:
        parts = [_transform_windows(g, edge_to_row, geom.blk_h, 0, num_windows)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda c: _transform_windows(g, edge_to_row, geom.blk_h, *c), chunks))

    unique_cols = np.concatenate([p[0] for p in parts]).astype(np.int64)
    counts = np.concatenate([p[1] for p in parts]).astype(np.int64)
    edge_to_column = np.concatenate([p[2] for p in parts]).astype(np.int64)
    window_offsets = np.zeros(num_windows + 1, dtype=np.int64)
    np.cumsum(counts, out=window_offsets[1:])
    block_partition = _tiles_for(counts, geom.blk_w)

    t = TransformedGraph(
        csr=g,
        geometry=geom,
        edge_to_row=edge_to_row,
        edge_to_column=edge_to_column,
        block_partition=block_partition,
        window_offsets=window_offsets,
        window_unique_cols=unique_cols,
        block_counter=int(block_partition.sum()),
    )
    logger.debug("SGT %s with %d worker(s): %r", geom, len(chunks), t)
    return t


def reblock(t: TransformedGraph, new_blk_w: int) -> TransformedGraph:
    """Recount tiles for a new tile width; edge maps are width-independent."""
    if new_blk_w < 1:
        raise GeometryError(f"tile width must be positive, got {new_blk_w}")
    if new_blk_w == t.geometry.blk_w:
        return t
    block_partition = _tiles_for(np.diff(t.window_offsets), new_blk_w)
    return dataclasses.replace(
        t,
        geometry=TileGeometry(t.geometry.blk_h, new_blk_w),
        block_partition=block_partition,
        block_counter=int(block_partition.sum()),
    )


def block_stats(t: TransformedGraph) -> BlockStats:
    capacity = t.block_counter * t.geometry.tile_size
    nnz = t.num_edges
    density = nnz / capacity if capacity else 0.0
    return BlockStats(t.block_counter, capacity, nnz, density)


def window_stats(t: TransformedGraph) -> list[WindowStats]:
    """Per-window tile occupancy."""
    bh = t.geometry.blk_h
    starts = np.arange(t.num_windows) * bh
    rows = np.minimum(starts + bh, t.num_nodes) - starts
    ptr = t.csr.node_pointer
    nnz = ptr[starts + rows] - ptr[starts]
    unique = np.diff(t.window_offsets)
    capacity = t.block_partition * t.geometry.tile_size
    return [
        WindowStats(w, int(rows[w]), int(unique[w]), int(t.block_partition[w]), int(nnz[w]),
                    float(nnz[w] / capacity[w]) if capacity[w] else 0.0)
        for w in range(t.num_windows)
    ]


def reconstruct_edges(t: TransformedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Map every edge back through the compressed coordinates to (row, col)."""
    window = t.edge_to_row // t.geometry.blk_h
    cols = t.window_unique_cols[t.window_offsets[window] + t.edge_to_column]
    return t.edge_to_row, cols


def _check_edge_maps(t: TransformedGraph) -> None:
    """Raise ShapeError unless the edge maps of *t* describe its own CSR graph."""
    g, geom = t.csr, t.geometry
    g.validate(strict=False)
    if t.num_windows != -(-g.num_nodes // geom.blk_h):
        raise ShapeError(f"{t.num_windows} windows do not cover {g.num_nodes} rows")
    offsets = t.window_offsets
    if offsets[0] != 0 or np.any(np.diff(offsets) < 0) or offsets[-1] != t.window_unique_cols.size:
        raise ShapeError("window offsets are not a valid pointer into the unique columns")
    unique = np.diff(offsets)
    if not np.array_equal(t.block_partition, _tiles_for(unique, geom.blk_w)):
        raise ShapeError("block partition disagrees with the unique column counts")
    if t.window_unique_cols.size and t.window_unique_cols.max() >= g.num_nodes:
        raise ShapeError("unique column id out of range")
    if not np.array_equal(t.edge_to_row, g.row_of_edges()):
        raise ShapeError("edge_to_row disagrees with node_pointer")
    if not t.num_edges:
        return
    window = t.edge_to_row // geom.blk_h
    if np.any(t.edge_to_column >= unique[window]):
        raise ShapeError("edge_to_column points past its window's unique columns")
    if not np.array_equal(t.window_unique_cols[offsets[window] + t.edge_to_column], g.edge_list):
        raise ShapeError("edge_to_column does not map edges back to their columns")


def save_sgt(t: TransformedGraph, path: str | Path) -> None:
    """Write the SGT1 little-endian binary format."""
    g = t.csr
    flags = FLAG_VALUES if g.values is not None else 0
    header = SGT1_HEADER.pack(
        SGT1_MAGIC, t.geometry.blk_h, t.geometry.blk_w, flags,
        g.num_nodes, g.num_edges, t.num_windows, t.block_counter,
    )
    arrays = [
        g.node_pointer.astype("<u8"),
        g.edge_list.astype("<u4"),
    ]
    if g.values is not None:
        arrays.append(g.values.astype("<f4"))
    arrays += [
        t.edge_to_row.astype("<u4"),
        t.edge_to_column.astype("<u4"),
        t.block_partition.astype("<u4"),
        t.window_offsets.astype("<u8"),
        t.window_unique_cols.astype("<u4"),
    ]
    try:
        with Path(path).open("wb") as fh:
            fh.write(header)
            for arr in arrays:
                fh.write(arr.tobytes())
    except OSError as exc:
        raise GraphIOError(f"cannot write {path}: {exc}") from exc
    logger.debug("Wrote %s: %r", path, t)


def load_sgt(path: str | Path) -> TransformedGraph:
    """Read an SGT1 file, rejecting wrong magic, truncation or trailing bytes."""
    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise GraphIOError(f"cannot read {path}: {exc}") from exc
    if len(payload) < SGT1_HEADER.size:
        raise FormatError(f"{path}: truncated SGT1 header")
    magic, blk_h, blk_w, flags, n, e, w, blocks = SGT1_HEADER.unpack_from(payload)
    if magic != SGT1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {SGT1_MAGIC!r}")

    offset = SGT1_HEADER.size

    def take(dtype: str, count: int) -> np.ndarray:
        nonlocal offset
        size = np.dtype(dtype).itemsize * count
        if offset + size > len(payload):
            raise FormatError(f"{path}: truncated payload")
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
        offset += size
        return arr.astype(np.float32 if dtype == "<f4" else np.int64)

    node_pointer = take("<u8", n + 1)
    edge_list = take("<u4", e)
    values = take("<f4", e) if flags & FLAG_VALUES else None
    edge_to_row = take("<u4", e)
    edge_to_column = take("<u4", e)
    block_partition = take("<u4", w)
    window_offsets = take("<u8", w + 1)
    unique_cols = take("<u4", int(window_offsets[-1]))
    if offset != len(payload):
        raise FormatError(f"{path}: {len(payload) - offset} trailing bytes")
    if node_pointer[-1] != e or int(block_partition.sum()) != blocks:
        raise FormatError(f"{path}: header counts disagree with payload")

    try:
        geom = TileGeometry(blk_h, blk_w)
    except GeometryError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    g = CsrGraph(int(n), node_pointer, edge_list, values)
    t = TransformedGraph(g, geom, edge_to_row, edge_to_column, block_partition,
                         window_offsets, unique_cols, int(blocks))
    try:
        _check_edge_maps(t)
    except ShapeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return t
