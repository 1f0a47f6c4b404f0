"""Graph builders and hypothesis strategies shared by the test modules."""

import numpy as np
from hypothesis import strategies as st

from dataset_service import RandomSpec, make_synthetic
from graph_io import CsrGraph

RTOL = 1e-4


def graph_from_edges(n, edges, values=None) -> CsrGraph:
    rows = np.array([e[0] for e in edges], dtype=np.int64)
    cols = np.array([e[1] for e in edges], dtype=np.int64)
    return CsrGraph.from_coo(n, rows, cols, None if values is None else np.asarray(values, dtype=np.float32))


def identity_graph(n: int) -> CsrGraph:
    return CsrGraph.from_coo(n, np.arange(n), np.arange(n))


def edge_set(g: CsrGraph) -> set[tuple[int, int]]:
    return set(zip(g.row_of_edges().tolist(), g.edge_list.tolist()))


def random_graph(rng, max_nodes=512, max_density=0.05, weighted=True) -> CsrGraph:
    n = int(rng.integers(1, max_nodes + 1))
    p = float(rng.uniform(0.0, max_density))
    g = make_synthetic(RandomSpec(n, p, seed=int(rng.integers(2**31))))
    if weighted:
        g = g.with_values(rng.uniform(0.5, 1.5, size=g.num_edges).astype(np.float32))
    return g


def features(rng, n, dim, low=-1.0, high=1.0) -> np.ndarray:
    return rng.uniform(low, high, size=(n, dim)).astype(np.float32)


@st.composite
def coo_graphs(draw, max_nodes=64, max_edges=256, weighted=False, min_nodes=1):
    """Raw edge lists, duplicates and self loops allowed."""
    n = draw(st.integers(min_nodes, max_nodes))
    m = draw(st.integers(0, max_edges))
    ids = st.integers(0, n - 1)
    rows = draw(st.lists(ids, min_size=m, max_size=m))
    cols = draw(st.lists(ids, min_size=m, max_size=m))
    values = None
    if weighted:
        values = draw(st.lists(st.floats(0.25, 4.0, width=32), min_size=m, max_size=m))
    return CsrGraph.from_coo(
        n,
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        None if values is None else np.array(values, dtype=np.float32),
    )
