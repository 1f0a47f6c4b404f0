"""Naive reference kernels and models.

These are correctness baselines only: plain per-row loops over the CSR
arrays or dense products, no tiling, always exact single precision. Nothing
here may import the tiled kernels.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from errors import ShapeError
from graph_io import CsrGraph

_TINY = np.finfo(np.float32).tiny


def _check_rows(g: CsrGraph, m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float32)
    if m.ndim != 2 or m.shape[0] != g.num_nodes:
        raise ShapeError(f"{name} must be {g.num_nodes} x k, got {m.shape}")
    return m


def oracle_spmm(g: CsrGraph, x) -> np.ndarray:
    """out[i] = sum over row i of value(e) * x[col(e)]."""
    x = _check_rows(g, x, "x")
    values = g.edge_values()
    out = np.zeros((g.num_nodes, x.shape[1]), dtype=np.float32)
    for i in range(g.num_nodes):
        s, e = g.node_pointer[i], g.node_pointer[i + 1]
        if e > s:
            out[i] = values[s:e] @ x[g.edge_list[s:e]]
    return out


def oracle_sddmm(g: CsrGraph, x, y) -> np.ndarray:
    """values[e] = value(e) * dot(x[row(e)], y[col(e)])."""
    x = _check_rows(g, x, "x")
    y = _check_rows(g, y, "y")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"x and y widths differ: {x.shape[1]} vs {y.shape[1]}")
    values = g.edge_values()
    out = np.zeros(g.num_edges, dtype=np.float32)
    for i in range(g.num_nodes):
        s, e = g.node_pointer[i], g.node_pointer[i + 1]
        out[s:e] = values[s:e] * (y[g.edge_list[s:e]] @ x[i])
    return out


def oracle_dense_gcn(adjacency, x, layers: Sequence) -> np.ndarray:
    """GCN forward on dense matrices: h <- relu?((A @ h) @ W) per layer.

    *layers* items expose ``weight`` and ``apply_relu``.
    """
    a = np.asarray(adjacency, dtype=np.float32)
    h = np.asarray(x, dtype=np.float32)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if h.ndim != 2 or h.shape[0] != a.shape[0]:
        raise ShapeError(f"x must have {a.shape[0]} rows, got {h.shape}")
    for k, layer in enumerate(layers):
        w = np.asarray(layer.weight, dtype=np.float32)
        if w.shape[0] != h.shape[1]:
            raise ShapeError(f"layer {k} expects width {w.shape[0]}, got {h.shape[1]}")
        h = (a @ h) @ w
        if layer.apply_relu:
            h = np.maximum(h, 0)
    return h


def oracle_gcn(g: CsrGraph, x, layers: Sequence) -> np.ndarray:
    """Same model as :func:`oracle_dense_gcn` without materializing A."""
    h = np.asarray(x, dtype=np.float32)
    for k, layer in enumerate(layers):
        w = np.asarray(layer.weight, dtype=np.float32)
        if w.shape[0] != h.shape[1]:
            raise ShapeError(f"layer {k} expects width {w.shape[0]}, got {h.shape[1]}")
        h = oracle_spmm(g, h) @ w
        if layer.apply_relu:
            h = np.maximum(h, 0)
    return h


def oracle_agnn(g: CsrGraph, x, betas: Sequence[float]) -> np.ndarray:
    """Row-by-row attention propagation: softmax of beta * cosine over neighbors."""
    h = _check_rows(g, x, "x")
    for beta in betas:
        norms = np.sqrt((h.astype(np.float64) ** 2).sum(axis=1))
        z = np.zeros_like(h)
        nonzero = norms > 0
        z[nonzero] = (h[nonzero] / norms[nonzero, None]).astype(np.float32)
        nxt = np.zeros_like(h)
        for i in range(g.num_nodes):
            nbrs = g.edge_list[g.node_pointer[i]:g.node_pointer[i + 1]]
            if nbrs.size == 0:
                continue
            logits = beta * (z[nbrs].astype(np.float64) @ z[i].astype(np.float64))
            p = np.exp(logits - logits.max())
            p /= p.sum()
            nxt[i] = (p[:, None] * h[nbrs]).sum(axis=0)
        h = nxt
    return h


def max_rel_err(got, expected) -> float:
    """Normwise relative error ||got - expected||_inf / ||expected||_inf."""
    got = np.asarray(got, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if got.shape != expected.shape:
        raise ShapeError(f"shape mismatch: {got.shape} vs {expected.shape}")
    if expected.size == 0:
        return 0.0
    scale = max(float(np.abs(expected).max()), float(_TINY))
    return float(np.abs(got - expected).max() / scale)


def worst_offender(got, expected) -> tuple[tuple[int, ...], float, float]:
    """Index and values of the largest absolute disagreement."""
    got = np.asarray(got)
    expected = np.asarray(expected)
    flat = int(np.argmax(np.abs(got.astype(np.float64) - expected)))
    index = tuple(int(i) for i in np.unravel_index(flat, got.shape))
    return index, float(got[index]), float(expected[index])
