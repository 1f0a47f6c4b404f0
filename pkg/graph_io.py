"""Graph ingestion and canonical CSR construction.

Loaders return exactly the file's entries (duplicates included); use
:func:`normalize_graph` to symmetrize, add self-loops and collapse repeats.
"""

from __future__ import annotations

import logging
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from errors import DegreeError, GraphIOError, NodeIdOverflowError, ParseError, ShapeError

logger = logging.getLogger(__name__)

MAX_NODE_ID = 2**32 - 1

FORMATS = ("tsv-edge-list", "matrix-market", "npz")


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Adjacency in compressed sparse row form.

    ``edge_list`` holds column ids, ascending within each row; ``values`` is
    optional and, when absent, kernels treat every edge as 1.0.
    """

    num_nodes: int
    node_pointer: np.ndarray
    edge_list: np.ndarray
    values: np.ndarray | None = None
    num_edges: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_pointer", np.ascontiguousarray(self.node_pointer, dtype=np.int64))
        object.__setattr__(self, "edge_list", np.ascontiguousarray(self.edge_list, dtype=np.int64))
        if self.values is not None:
            object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float32))
        object.__setattr__(self, "num_edges", int(self.edge_list.shape[0]))

    @classmethod
    def from_coo(
        cls,
        num_nodes: int,
        rows: np.ndarray,
        cols: np.ndarray,
        values: np.ndarray | None = None,
    ) -> "CsrGraph":
        """Build a CSR graph from coordinate triples, sorting rows then columns.

        The sort is stable, so repeated (row, col) pairs keep their file order.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise ShapeError(f"rows/cols length mismatch: {rows.shape[0]} vs {cols.shape[0]}")
        order = np.lexsort((cols, rows))
        counts = np.bincount(rows, minlength=num_nodes) if rows.size else np.zeros(num_nodes, dtype=np.int64)
        node_pointer = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=node_pointer[1:])
        vals = None
        if values is not None:
            vals = np.asarray(values, dtype=np.float32)[order]
        return cls(num_nodes, node_pointer, cols[order], vals)

    def row_of_edges(self) -> np.ndarray:
        """CSR row of every edge (the edge-to-row map)."""
        return np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.node_pointer))

    def degrees(self) -> np.ndarray:
        return np.diff(self.node_pointer)

    def edge_values(self) -> np.ndarray:
        """Per-edge values, defaulting to 1.0 for unweighted graphs."""
        if self.values is None:
            return np.ones(self.num_edges, dtype=np.float32)
        return self.values

    def with_values(self, values: np.ndarray | None) -> "CsrGraph":
        if values is not None and len(values) != self.num_edges:
            raise ShapeError(f"expected {self.num_edges} edge values, got {len(values)}")
        return CsrGraph(self.num_nodes, self.node_pointer, self.edge_list, values)

    def validate(self, strict: bool = True) -> None:
        """Check the CSR invariants; *strict* also forbids duplicate edges."""
        n, ptr, cols = self.num_nodes, self.node_pointer, self.edge_list
        if ptr.shape != (n + 1,):
            raise ShapeError(f"node_pointer must have {n + 1} entries, has {ptr.shape[0]}")
        if ptr[0] != 0 or ptr[-1] != self.num_edges:
            raise ShapeError("node_pointer must start at 0 and end at num_edges")
        if np.any(np.diff(ptr) < 0):
            raise ShapeError("node_pointer is decreasing")
        if cols.size and (cols.min() < 0 or cols.max() >= n):
            raise ShapeError("edge_list entry out of range")
        if self.values is not None:
            if self.values.shape != (self.num_edges,):
                raise ShapeError("values length differs from num_edges")
            if not np.all(np.isfinite(self.values)):
                raise ShapeError("values contain NaN or Inf")
        if cols.size > 1:
            step = np.diff(cols)
            edge_rows = self.row_of_edges()
            same_row = edge_rows[1:] == edge_rows[:-1]
            bad = step[same_row] <= 0 if strict else step[same_row] < 0
            if np.any(bad):
                raise ShapeError("columns not ascending within a row")

    def __repr__(self) -> str:
        weighted = "weighted" if self.values is not None else "unweighted"
        return f"CsrGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges}, {weighted})"


def csr_to_dense(g: CsrGraph) -> np.ndarray:
    """Dense float32 adjacency; repeated edges are summed."""
    dense = np.zeros((g.num_nodes, g.num_nodes), dtype=np.float32)
    np.add.at(dense, (g.row_of_edges(), g.edge_list), g.edge_values())
    return dense


def infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".mtx":
        return "matrix-market"
    if suffix == ".npz":
        return "npz"
    return "tsv-edge-list"


def _check_id(value: int, line: int, path: str) -> int:
    if value < 0:
        raise ParseError(f"negative node id {value}", line, path)
    if value > MAX_NODE_ID:
        raise NodeIdOverflowError(f"{path}:{line}: node id {value} does not fit in 32 bits")
    return value


def _parse_value(token: str, line: int, path: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"invalid edge value {token!r}", line, path) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite edge value {token!r}", line, path)
    return value


def _parse_tsv(lines, path: str):
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    width = None
    for line_no, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'src dst [value]', got {raw.strip()!r}", line_no, path)
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ParseError("edge values present on some lines only", line_no, path)
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"node ids must be integers: {raw.strip()!r}", line_no, path) from None
        rows.append(_check_id(src, line_no, path))
        cols.append(_check_id(dst, line_no, path))
        if width == 3:
            vals.append(_parse_value(parts[2], line_no, path))
    num_nodes = max(max(rows, default=-1), max(cols, default=-1)) + 1
    return num_nodes, rows, cols, (vals if width == 3 else None)


def _parse_matrix_market(lines, path: str):
    it = iter(enumerate(lines, 1))
    try:
        line_no, header = next(it)
    except StopIteration:
        raise ParseError("empty file, missing %%MatrixMarket header", 1, path) from None
    tokens = header.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise ParseError(f"bad header {header.strip()!r}", line_no, path)
    layout, field_kind, symmetry = tokens[2:]
    if layout != "coordinate":
        raise ParseError(f"only sparse 'coordinate' matrices are supported, got {layout!r}", line_no, path)
    if field_kind not in ("pattern", "real", "integer", "double"):
        raise ParseError(f"unsupported field {field_kind!r}", line_no, path)
    if symmetry not in ("general", "symmetric"):
        raise ParseError(f"unsupported symmetry {symmetry!r}", line_no, path)

    size = None
    for line_no, raw in it:
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(f"bad size line {text!r}", line_no, path)
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise ParseError(f"bad size line {text!r}", line_no, path) from None
        break
    if size is None:
        raise ParseError("missing size line", line_no, path)
    n_rows, n_cols, nnz = size

    width = 2 if field_kind == "pattern" else 3
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for line_no, raw in it:
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != width:
            raise ParseError(f"expected {width} fields, got {len(parts)}", line_no, path)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"indices must be integers: {text!r}", line_no, path) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            if i - 1 > MAX_NODE_ID or j - 1 > MAX_NODE_ID:
                raise NodeIdOverflowError(f"{path}:{line_no}: node id does not fit in 32 bits")
            raise ParseError(f"entry ({i}, {j}) outside {n_rows}x{n_cols}", line_no, path)
        rows.append(_check_id(i - 1, line_no, path))
        cols.append(_check_id(j - 1, line_no, path))
        if width == 3:
            vals.append(_parse_value(parts[2], line_no, path))
    if len(rows) != nnz:
        raise ParseError(f"size line announces {nnz} entries, found {len(rows)}", line_no, path)

    if symmetry == "symmetric":
        off = [k for k in range(len(rows)) if rows[k] != cols[k]]
        rows, cols = rows + [cols[k] for k in off], cols + [rows[k] for k in off]
        if width == 3:
            vals = vals + [vals[k] for k in off]
    return max(n_rows, n_cols), rows, cols, (vals if width == 3 else None)


def _npz_edges(npz, path: Path):
    files = set(npz.files)
    values = None
    if "edge_index" in files:
        edge_index = np.asarray(npz["edge_index"], dtype=np.int64)
        if edge_index.ndim != 2 or 2 not in edge_index.shape:
            raise ParseError("edge_index must have shape [2, E]", 0, str(path))
        if edge_index.shape[0] != 2:
            edge_index = edge_index.T
        src, dst = edge_index[0], edge_index[1]
    elif {"src_li", "dst_li"} <= files:
        src = np.asarray(npz["src_li"], dtype=np.int64)
        dst = np.asarray(npz["dst_li"], dtype=np.int64)
    elif {"adj_indptr", "adj_indices"} <= files:
        # scipy CSR split into arrays, as citation datasets ship it
        indptr = np.asarray(npz["adj_indptr"], dtype=np.int64)
        dst = np.asarray(npz["adj_indices"], dtype=np.int64)
        if indptr.ndim != 1 or indptr.size == 0 or indptr[0] != 0 or indptr[-1] != dst.size \
                or np.any(np.diff(indptr) < 0):
            raise ParseError("adj_indptr is not a valid row pointer for adj_indices", 0, str(path))
        src = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))
        if "adj_data" in files:
            values = np.asarray(npz["adj_data"], dtype=np.float32)
    else:
        raise ParseError("expected 'edge_index', 'src_li'/'dst_li' or 'adj_indptr'/'adj_indices' arrays",
                         0, str(path))
    if "edge_weight" in files:
        values = np.asarray(npz["edge_weight"], dtype=np.float32)
    if "num_nodes" in files:
        num_nodes = int(np.asarray(npz["num_nodes"]).item())
    elif "adj_shape" in files:
        num_nodes = int(np.asarray(npz["adj_shape"]).max())
    else:
        num_nodes = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
    return num_nodes, src, dst, values


def _load_npz(path: Path):
    try:
        archive = np.load(path)
        if not isinstance(archive, np.lib.npyio.NpzFile):
            raise ParseError("expected an npz archive, found a single array", 0, str(path))
        with archive as npz:
            num_nodes, src, dst, values = _npz_edges(npz, path)
    except ParseError:
        raise
    except (ValueError, EOFError, KeyError, zipfile.BadZipFile) as exc:
        raise ParseError(f"not a readable npz archive: {exc}", 0, str(path)) from exc
    if src.size and min(src.min(), dst.min()) < 0:
        raise ParseError("negative node id", 0, str(path))
    if src.size and max(src.max(), dst.max()) > MAX_NODE_ID:
        raise NodeIdOverflowError(f"{path}: node id does not fit in 32 bits")
    if src.size and max(src.max(), dst.max()) >= num_nodes:
        raise ParseError(f"node id exceeds num_nodes={num_nodes}", 0, str(path))
    if values is not None and (values.shape != src.shape or not np.all(np.isfinite(values))):
        raise ParseError("edge values must be finite and aligned with the edges", 0, str(path))
    return num_nodes, src, dst, values


def load_edge_list(path: str | Path, format: str | None = None, remap_ids: bool = False) -> CsrGraph:
    """Load a graph file into CSR, rows sorted, duplicates preserved.

    *format* is one of ``tsv-edge-list`` (0-based ids), ``matrix-market``
    (1-based, converted) or ``npz``; inferred from the suffix when omitted.
    With *remap_ids* sparse id spaces are compacted to 0..n-1 in id order.
    """
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt not in FORMATS:
        raise ParseError(f"unknown graph format {fmt!r}; expected one of {', '.join(FORMATS)}")
    try:
        if fmt == "npz":
            num_nodes, rows, cols, vals = _load_npz(path)
        else:
            with path.open("r", encoding="utf-8") as fh:
                parser = _parse_matrix_market if fmt == "matrix-market" else _parse_tsv
                num_nodes, rows, cols, vals = parser(fh, str(path))
    except (OSError, UnicodeDecodeError) as exc:
        if isinstance(exc, GraphIOError):
            raise
        raise GraphIOError(f"cannot read {path}: {exc}") from exc

    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if remap_ids and rows.size:
        ids, inverse = np.unique(np.concatenate([rows, cols]), return_inverse=True)
        rows, cols = inverse[: rows.size], inverse[rows.size:]
        num_nodes = int(ids.size)
    g = CsrGraph.from_coo(num_nodes, rows, cols, None if vals is None else np.asarray(vals, dtype=np.float32))
    logger.debug("Loaded %s (%s): %s", path, fmt, g)
    return g


def normalize_graph(
    g: CsrGraph,
    symmetrize: bool = False,
    add_self_loops: bool = False,
    dedupe: bool = True,
) -> CsrGraph:
    """Canonicalize a graph; idempotent for every option combination.

    ``symmetrize`` adds (j, i) with the value of (i, j) wherever (j, i) is
    missing; ``add_self_loops`` adds (i, i) = 1.0 where missing; ``dedupe``
    collapses repeated edges, summing their values.
    """
    n = g.num_nodes
    if n == 0:
        return g
    rows = g.row_of_edges()
    cols = g.edge_list
    vals = None if g.values is None else g.values.astype(np.float64)
    keys = rows * n + cols

    if symmetrize:
        missing = ~np.isin(cols * n + rows, keys)
        rows, cols = np.concatenate([rows, cols[missing]]), np.concatenate([cols, rows[missing]])
        if vals is not None:
            vals = np.concatenate([vals, vals[missing]])
        keys = rows * n + cols

    if add_self_loops:
        diag = np.arange(n, dtype=np.int64)
        missing = diag[~np.isin(diag * n + diag, keys)]
        rows, cols = np.concatenate([rows, missing]), np.concatenate([cols, missing])
        if vals is not None:
            vals = np.concatenate([vals, np.ones(missing.size)])
        keys = rows * n + cols

    if dedupe:
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        if vals is not None:
            vals = np.bincount(inverse, weights=vals, minlength=unique_keys.size)
        rows, cols = unique_keys // n, unique_keys % n

    out = CsrGraph.from_coo(n, rows, cols, None if vals is None else vals.astype(np.float32))
    logger.debug("Normalized %d -> %d edges (symmetrize=%s, self_loops=%s, dedupe=%s)",
                 g.num_edges, out.num_edges, symmetrize, add_self_loops, dedupe)
    return out


def gcn_normalize_values(g: CsrGraph) -> CsrGraph:
    """Symmetric GCN weights: value(i, j) = 1 / sqrt(deg(i) * deg(j))."""
    deg = g.degrees()
    if np.any(deg == 0):
        row = int(np.flatnonzero(deg == 0)[0])
        raise DegreeError(f"row {row} has no edges; add self-loops before GCN normalization")
    rows = g.row_of_edges()
    values = 1.0 / np.sqrt(deg[rows].astype(np.float64) * deg[g.edge_list])
    return g.with_values(values.astype(np.float32))
