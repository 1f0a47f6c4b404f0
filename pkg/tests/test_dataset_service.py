import numpy as np
import pytest

from dataset_service import (
    SUITES,
    BlockDenseSpec,
    DatasetService,
    RandomSpec,
    is_synthetic,
    make_synthetic,
    parse_synthetic,
    reference_block_count,
)
from errors import GraphIOError, ParseError, RangeError
from sgt_transform import TileGeometry, block_stats, save_sgt, sgt_transform
from strategies import identity_graph


def test_blockdense_tiles_are_full():
    g = make_synthetic(BlockDenseSpec(windows=4, tiles_per_window=2))
    assert g.num_edges == 4 * 2 * 128
    stats = block_stats(sgt_transform(g))
    assert stats.block_counter == 8
    assert stats.capacity == stats.nnz == 1024
    assert stats.mean_tile_density == 1.0


def test_random_extremes():
    assert make_synthetic(RandomSpec(100, 0.0)).num_edges == 0
    full = make_synthetic(RandomSpec(100, 1.0))
    assert full.num_edges == 10_000
    full.validate()


def test_random_is_seeded():
    a = make_synthetic(RandomSpec(200, 0.05, seed=3))
    b = make_synthetic(RandomSpec(200, 0.05, seed=3))
    assert np.array_equal(a.edge_list, b.edge_list)


@pytest.mark.parametrize(
    "spec",
    [RandomSpec(0, 0.1), RandomSpec(10, 1.5), RandomSpec(10, -0.1), BlockDenseSpec(0, 1), BlockDenseSpec(1, 0)],
)
def test_synthetic_ranges(spec):
    with pytest.raises(RangeError):
        make_synthetic(spec)


def test_parse_synthetic():
    assert parse_synthetic("random:n=256,p=0.02,seed=1") == RandomSpec(256, 0.02, 1)
    assert parse_synthetic("blockdense:windows=4,tiles=2") == BlockDenseSpec(4, 2)
    assert is_synthetic("random:n=4,p=0.5")
    assert not is_synthetic("graphs/random.tsv")


@pytest.mark.parametrize("text", ["random:n=4", "random:n=4,p", "ring:n=4", "blockdense:windows=x"])
def test_parse_synthetic_errors(text):
    with pytest.raises(ParseError):
        parse_synthetic(text)


def test_expand_suites():
    assert DatasetService.expand(["smoke"]) == SUITES["smoke"]
    assert DatasetService.expand(["smoke", "g.tsv"]) == SUITES["smoke"] + ["g.tsv"]


def test_missing_dataset(datasets, tmp_path):
    with pytest.raises(GraphIOError):
        datasets.get_graph(str(tmp_path / "nope.tsv"))


def test_transform_is_cached(datasets):
    a = datasets.get_transform("random:n=64,p=0.1")
    assert datasets.get_transform("random:n=64,p=0.1") is a
    assert a.geometry == TileGeometry()


def test_other_width_reuses_edge_maps(datasets):
    narrow = datasets.get_transform("random:n=64,p=0.1", TileGeometry(16, 8))
    wide = datasets.get_transform("random:n=64,p=0.1", TileGeometry(16, 16))
    assert wide.edge_to_column is narrow.edge_to_column
    assert wide.block_counter == sgt_transform(narrow.csr, TileGeometry(16, 16)).block_counter


def test_sgt_file_keeps_its_geometry(datasets, tmp_path):
    path = tmp_path / "g.sgt"
    save_sgt(sgt_transform(identity_graph(40), TileGeometry(8, 4)), path)
    t = datasets.get_transform(str(path))
    assert t.geometry == TileGeometry(8, 4)
    assert t.num_nodes == 40


def test_file_datasets_are_normalized(write_text):
    path = write_text("g.tsv", "0 1\n0 1\n")
    assert DatasetService().get_graph(str(path)).num_edges == 1
    assert DatasetService(dedupe=False).get_graph(str(path)).num_edges == 2
    assert DatasetService(symmetrize=True, add_self_loops=True).get_graph(str(path)).num_edges == 4


def test_blockdense_grows_nodes_for_wide_windows():
    g = make_synthetic(BlockDenseSpec(windows=1, tiles_per_window=3))
    assert g.num_nodes == 24
    stats = block_stats(sgt_transform(g))
    assert stats.block_counter == 3
    assert stats.nnz == stats.capacity == 3 * 128


@pytest.mark.parametrize(
    "dataset, expected",
    [("data/citeseer.npz", 659), ("CORA.mtx", 681), ("com-amazon.tsv", 124398), ("amazon0601", 164737),
     ("pubmed.npz", None), ("random:n=4,p=0.5", None)],
)
def test_reference_block_count(dataset, expected):
    assert reference_block_count(dataset) == expected
