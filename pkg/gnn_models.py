"""GCN and AGNN forward passes built on the hybrid kernels (inference only)."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from config import AGNN_LAYERS, GCN_HIDDEN, GCN_LAYERS, SDDMM_BLK_W, WEIGHT_INIT_BOUND
from errors import DegenerateRowWarning, FormatError, GraphIOError, NonFiniteError, ShapeError
from graph_io import CsrGraph
from sgt_transform import TransformedGraph, reblock
from tile_exec import HybridSplitPlan, Precision, as_dense, make_split_plan, sddmm_hybrid, spmm_hybrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GcnLayerParams:
    weight: np.ndarray
    apply_relu: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "weight", as_dense(self.weight, "weight"))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class AgnnLayerParams:
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.beta):
            raise NonFiniteError(f"attention temperature must be finite, got {self.beta}")


def init_gcn_layers(
    in_dim: int,
    out_dim: int,
    hidden: int = GCN_HIDDEN,
    num_layers: int = GCN_LAYERS,
    seed: int = 0,
) -> list[GcnLayerParams]:
    """Seeded uniform [-0.1, 0.1] weights; ReLU on every layer but the last."""
    rng = np.random.default_rng(seed)
    dims = [in_dim] + [hidden] * (num_layers - 1) + [out_dim]
    return [
        GcnLayerParams(
            rng.uniform(-WEIGHT_INIT_BOUND, WEIGHT_INIT_BOUND, size=(dims[k], dims[k + 1])).astype(np.float32),
            apply_relu=k < num_layers - 1,
        )
        for k in range(num_layers)
    ]


def init_agnn_layers(num_layers: int = AGNN_LAYERS, beta: float = 1.0) -> list[AgnnLayerParams]:
    return [AgnnLayerParams(beta) for _ in range(num_layers)]


def save_weights(path: str | Path, layers: Sequence[GcnLayerParams]) -> None:
    """Write every layer's weights as flat little-endian f32 into *path*,
    and their shapes as one line of JSON into ``<path>.json``."""
    path = Path(path)
    sidecar = {"layers": [{"shape": list(l.weight.shape), "relu": l.apply_relu} for l in layers]}
    try:
        with path.open("wb") as fh:
            for layer in layers:
                fh.write(layer.weight.astype("<f4").tobytes())
        path.with_name(path.name + ".json").write_text(json.dumps(sidecar) + "\n")
    except OSError as exc:
        raise GraphIOError(f"cannot write weights {path}: {exc}") from exc


def load_weights(path: str | Path) -> list[GcnLayerParams]:
    path = Path(path)
    try:
        payload = path.read_bytes()
        meta = json.loads(path.with_name(path.name + ".json").read_text())
    except OSError as exc:
        raise GraphIOError(f"cannot read weights {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}.json: {exc}") from exc

    flat = np.frombuffer(payload, dtype="<f4")
    layers, offset = [], 0
    for spec in meta.get("layers", []):
        rows, cols = (int(v) for v in spec["shape"])
        if offset + rows * cols > flat.size:
            raise FormatError(f"{path}: truncated, shapes in sidecar need more data")
        weight = flat[offset:offset + rows * cols].reshape(rows, cols).astype(np.float32)
        layers.append(GcnLayerParams(weight, bool(spec.get("relu", True))))
        offset += rows * cols
    if offset != flat.size:
        raise FormatError(f"{path}: {flat.size - offset} values not described by the sidecar")
    return layers


def gcn_forward(
    t: TransformedGraph,
    x,
    layers: Sequence[GcnLayerParams],
    plan: HybridSplitPlan | None = None,
    prec: Precision = Precision.EXACT_F32,
    workers: int = 1,
) -> np.ndarray:
    """h <- x; per layer aggregate (hybrid SpMM), update (h @ W), optional ReLU.

    *t* should carry GCN-normalized edge values.
    """
    h = as_dense(x, "x")
    for k, layer in enumerate(layers):
        if layer.in_dim != h.shape[1]:
            raise ShapeError(f"layer {k} expects width {layer.in_dim}, got {h.shape[1]}")
        h = spmm_hybrid(t, h, plan, prec, workers) @ layer.weight
        if layer.apply_relu:
            np.maximum(h, 0, out=h)
        if not np.all(np.isfinite(h)):
            raise NonFiniteError(f"GCN layer {k} produced NaN or Inf")
    return h


def edge_softmax(g: CsrGraph, logits) -> np.ndarray:
    """Softmax of edge logits within each CSR row (max-subtracted)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (g.num_edges,):
        raise ShapeError(f"expected {g.num_edges} logits, got {logits.shape}")
    if g.num_edges == 0:
        return np.zeros(0, dtype=np.float32)
    deg = g.degrees()
    filled = deg > 0
    starts = g.node_pointer[:-1][filled]
    row_max = np.repeat(np.maximum.reduceat(logits, starts), deg[filled])
    ex = np.exp(logits - row_max)
    row_sum = np.repeat(np.add.reduceat(ex, starts), deg[filled])
    return (ex / row_sum).astype(np.float32)


def _l2_normalize_rows(h: np.ndarray) -> tuple[np.ndarray, int]:
    norms = np.sqrt((h.astype(np.float64) ** 2).sum(axis=1))
    z = np.zeros_like(h)
    ok = norms > 0
    z[ok] = (h[ok] / norms[ok, None]).astype(np.float32)
    return z, int((~ok).sum())


def agnn_forward(
    t: TransformedGraph,
    x,
    layers: Sequence[AgnnLayerParams],
    plan: HybridSplitPlan | None = None,
    prec: Precision = Precision.EXACT_F32,
    workers: int = 1,
) -> np.ndarray:
    """Attention propagation: per layer, cosine logits via SDDMM, edge softmax,
    then SpMM with the attention weights as edge values. Width is preserved.

    Zero-norm rows normalize to zero vectors; a DegenerateRowWarning reports
    how many were seen.
    """
    h = as_dense(x, "x")
    if h.shape[0] != t.num_nodes:
        raise ShapeError(f"x has {h.shape[0]} rows, graph has {t.num_nodes} nodes")
    ratio = plan.ratio if plan is not None else 1.0
    structure = reblock(t.with_values(None), SDDMM_BLK_W)
    sddmm_plan = make_split_plan(structure, ratio)
    spmm_plan = make_split_plan(t, ratio)
    degenerate = 0
    for layer in layers:
        z, zero_rows = _l2_normalize_rows(h)
        degenerate += zero_rows
        cosine = sddmm_hybrid(structure, z, z, sddmm_plan, prec, workers)
        attention = edge_softmax(t.csr, layer.beta * cosine)
        h = spmm_hybrid(t.with_values(attention), h, spmm_plan, prec, workers)
    if degenerate:
        logger.warning("AGNN normalized %d zero-norm feature rows to zero", degenerate)
        warnings.warn(f"{degenerate} zero-norm rows normalized to zero vectors", DegenerateRowWarning, stacklevel=2)
    return h
