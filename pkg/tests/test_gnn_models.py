import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from numpy.testing import assert_allclose, assert_array_equal

from errors import DegenerateRowWarning, FormatError, GraphIOError, NonFiniteError, ShapeError
from gnn_models import (
    AgnnLayerParams,
    GcnLayerParams,
    agnn_forward,
    edge_softmax,
    gcn_forward,
    init_agnn_layers,
    init_gcn_layers,
    load_weights,
    save_weights,
)
from graph_io import CsrGraph, csr_to_dense, gcn_normalize_values, normalize_graph
from oracle import max_rel_err, oracle_agnn, oracle_dense_gcn, oracle_spmm
from sgt_transform import sgt_transform
from strategies import RTOL, coo_graphs, features, graph_from_edges, identity_graph, random_graph
from tile_exec import make_split_plan


def gcn_graph(rng, max_nodes):
    g = normalize_graph(random_graph(rng, max_nodes=max_nodes, max_density=0.08, weighted=False),
                        symmetrize=True, add_self_loops=True)
    return gcn_normalize_values(g)


def test_init_gcn_layers():
    layers = init_gcn_layers(8, 3, hidden=16, num_layers=2, seed=9)
    assert [(l.in_dim, l.out_dim) for l in layers] == [(8, 16), (16, 3)]
    assert [l.apply_relu for l in layers] == [True, False]
    assert all(np.abs(l.weight).max() <= 0.1 for l in layers)
    again = init_gcn_layers(8, 3, hidden=16, num_layers=2, seed=9)
    assert_array_equal(layers[0].weight, again[0].weight)


def test_gcn_identity_graph_identity_weights(rng):
    t = sgt_transform(gcn_normalize_values(identity_graph(20)))
    x = features(rng, 20, 4, low=0.0)
    layers = [GcnLayerParams(np.eye(4, dtype=np.float32)) for _ in range(2)]
    assert_array_equal(gcn_forward(t, x, layers), x)


def test_gcn_zero_weights(rng):
    g = gcn_graph(rng, 64)
    layers = [GcnLayerParams(np.zeros((6, 6), dtype=np.float32), apply_relu=False)]
    assert not gcn_forward(sgt_transform(g), features(rng, g.num_nodes, 6), layers).any()


@pytest.mark.parametrize("ratio", [0.0, 0.5, 1.0])
def test_gcn_matches_dense_oracle(rng, ratio):
    g = gcn_graph(rng, 128)
    t = sgt_transform(g)
    x = features(rng, g.num_nodes, 16)
    layers = init_gcn_layers(16, 16, hidden=16, num_layers=2, seed=1)
    out = gcn_forward(t, x, layers, make_split_plan(t, ratio))
    assert out.shape == (g.num_nodes, 16)
    assert max_rel_err(out, oracle_dense_gcn(csr_to_dense(g), x, layers)) <= RTOL


def test_gcn_layer_chain_mismatch(rng):
    t = sgt_transform(gcn_normalize_values(identity_graph(4)))
    layers = [GcnLayerParams(np.eye(3, dtype=np.float32)), GcnLayerParams(np.eye(2, dtype=np.float32))]
    with pytest.raises(ShapeError):
        gcn_forward(t, features(rng, 4, 3), layers)


def test_gcn_is_permutation_equivariant(rng):
    g = gcn_graph(rng, 64)
    n = g.num_nodes
    perm = rng.permutation(n)
    rows, cols = g.row_of_edges(), g.edge_list
    relabeled = CsrGraph.from_coo(n, perm[rows], perm[cols], g.values)
    x = features(rng, n, 8)
    x_perm = np.empty_like(x)
    x_perm[perm] = x
    layers = init_gcn_layers(8, 8, seed=4)
    out = gcn_forward(sgt_transform(g), x, layers)
    out_perm = gcn_forward(sgt_transform(relabeled), x_perm, layers)
    assert_allclose(out_perm[perm], out, rtol=1e-5, atol=1e-6)


def test_softmax_single_edge():
    assert_array_equal(edge_softmax(graph_from_edges(2, [(0, 1)]), [3.7]), [1.0])


def test_softmax_equal_logits():
    assert_allclose(edge_softmax(graph_from_edges(2, [(0, 0), (0, 1)]), [2.0, 2.0]), [0.5, 0.5])


def test_softmax_closed_form():
    assert_allclose(edge_softmax(graph_from_edges(2, [(1, 0), (1, 1)]), [0.0, math.log(2)]), [1 / 3, 2 / 3],
                    rtol=1e-6)


def test_softmax_large_logits_do_not_overflow():
    out = edge_softmax(graph_from_edges(1, [(0, 0), (0, 0)]), [1000.0, 1000.0])
    assert_allclose(out, [0.5, 0.5])


def test_softmax_shape_error():
    with pytest.raises(ShapeError):
        edge_softmax(graph_from_edges(2, [(0, 1)]), [1.0, 2.0])


@given(coo_graphs(max_nodes=128, max_edges=512))
def test_softmax_rows_sum_to_one(g):
    logits = np.random.default_rng(g.num_edges).normal(scale=5.0, size=g.num_edges)
    out = edge_softmax(g, logits)
    assert np.all(out >= 0)
    filled = g.degrees() > 0
    if filled.any():
        sums = np.add.reduceat(out.astype(np.float64), g.node_pointer[:-1][filled])
        assert np.all(np.abs(sums - 1.0) <= 1e-6)


def test_agnn_single_node_keeps_features():
    t = sgt_transform(graph_from_edges(1, [(0, 0)]))
    x = np.array([[0.3, -1.2, 2.0]], dtype=np.float32)
    assert_allclose(agnn_forward(t, x, init_agnn_layers(4)), x, rtol=1e-6)


def test_agnn_beta_zero_is_neighbor_mean(rng):
    for _ in range(20):
        g = normalize_graph(random_graph(rng, max_nodes=96, max_density=0.1, weighted=False), add_self_loops=True)
        x = features(rng, g.num_nodes, 8)
        mean = g.with_values((1.0 / g.degrees()[g.row_of_edges()]).astype(np.float32))
        expected = x
        for _ in range(2):
            expected = oracle_spmm(mean, expected)
        out = agnn_forward(sgt_transform(g), x, init_agnn_layers(2, beta=0.0))
        assert max_rel_err(out, expected) <= RTOL


@pytest.mark.parametrize("ratio", [0.0, 1.0])
def test_agnn_matches_brute_force(rng, ratio):
    g = normalize_graph(random_graph(rng, max_nodes=128, max_density=0.08, weighted=False),
                        symmetrize=True, add_self_loops=True)
    t = sgt_transform(g)
    x = features(rng, g.num_nodes, 32)
    layers = init_agnn_layers(4, beta=1.5)
    out = agnn_forward(t, x, layers, make_split_plan(t, ratio))
    assert out.shape == x.shape
    assert max_rel_err(out, oracle_agnn(g, x, [l.beta for l in layers])) <= RTOL


def test_agnn_zero_rows_warn_and_stay_finite(rng):
    g = normalize_graph(graph_from_edges(3, [(0, 1), (1, 2)]), symmetrize=True, add_self_loops=True)
    x = features(rng, 3, 4)
    x[1] = 0.0
    with pytest.warns(DegenerateRowWarning):
        out = agnn_forward(sgt_transform(g), x, init_agnn_layers(1))
    assert np.all(np.isfinite(out))


def test_agnn_no_warning_on_regular_input(rng):
    g = normalize_graph(graph_from_edges(3, [(0, 1)]), add_self_loops=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error", DegenerateRowWarning)
        agnn_forward(sgt_transform(g), features(rng, 3, 4, low=0.5), init_agnn_layers(2))


def test_agnn_beta_must_be_finite():
    with pytest.raises(NonFiniteError):
        AgnnLayerParams(float("nan"))


def test_weight_file_round_trip(tmp_path):
    layers = init_gcn_layers(5, 2, hidden=7, num_layers=3, seed=2)
    path = tmp_path / "gcn.bin"
    save_weights(path, layers)
    assert (tmp_path / "gcn.bin.json").read_text().count("\n") == 1
    back = load_weights(path)
    assert [l.apply_relu for l in back] == [True, True, False]
    for a, b in zip(layers, back):
        assert_array_equal(a.weight, b.weight)


def test_weight_file_truncated(tmp_path):
    path = tmp_path / "gcn.bin"
    save_weights(path, init_gcn_layers(4, 4, seed=0))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError):
        load_weights(path)


def test_weight_file_without_sidecar(tmp_path):
    path = tmp_path / "gcn.bin"
    path.write_bytes(b"\x00" * 16)
    with pytest.raises(GraphIOError):
        load_weights(path)
