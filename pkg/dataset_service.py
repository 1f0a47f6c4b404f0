from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config import DEFAULT_BLK_H, DEFAULT_BLK_W, REFERENCE_BLOCK_COUNTS
from errors import GraphIOError, ParseError, RangeError
from graph_io import CsrGraph, load_edge_list, normalize_graph
from sgt_transform import TileGeometry, TransformedGraph, load_sgt, reblock, sgt_transform

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RandomSpec:
    """Each ordered pair (i, j) present independently with probability p."""

    n: int
    p: float
    seed: int = 0


@dataclass(frozen=True)
class BlockDenseSpec:
    """``windows`` row windows, each with ``tiles_per_window`` fully dense tiles.

    The graph has ``max(windows * blk_h, tiles_per_window * blk_w)`` nodes, so
    a single window can still hold many tiles.
    """

    windows: int
    tiles_per_window: int
    seed: int = 0
    blk_h: int = DEFAULT_BLK_H
    blk_w: int = DEFAULT_BLK_W


SyntheticSpec = RandomSpec | BlockDenseSpec

# named groups of datasets for `bench --suite`
SUITES: dict[str, list[str]] = {
    # 1024 windows x 8 dense tiles x 128 = 2^20 non-zeros
    "synthetic-blockdense": ["blockdense:windows=1024,tiles=8,seed=0"],
    "synthetic-random": ["random:n=2048,p=0.01,seed=0", "random:n=1024,p=0.05,seed=1"],
    "smoke": ["blockdense:windows=4,tiles=2,seed=0", "random:n=256,p=0.02,seed=0"],
}


def make_synthetic(spec: SyntheticSpec) -> CsrGraph:
    """Desk-scale stand-in graphs with a known structure."""
    if isinstance(spec, RandomSpec):
        if spec.n < 1 or not 0.0 <= spec.p <= 1.0:
            raise RangeError(f"random graph needs n >= 1 and 0 <= p <= 1, got n={spec.n}, p={spec.p}")
        rng = np.random.default_rng(spec.seed)
        degrees = rng.binomial(spec.n, spec.p, size=spec.n)
        cols = [np.sort(rng.choice(spec.n, size=int(k), replace=False)) for k in degrees]
        rows = np.repeat(np.arange(spec.n), degrees)
        flat = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        return CsrGraph.from_coo(spec.n, rows, flat)

    if spec.windows < 1 or spec.tiles_per_window < 1:
        raise RangeError("block-dense graph needs at least one window and one tile per window")
    width = spec.tiles_per_window * spec.blk_w
    # wide windows need at least `width` distinct columns; rows past the last window stay empty
    n = max(spec.windows * spec.blk_h, width)
    rng = np.random.default_rng(spec.seed)
    rows, cols = [], []
    for w in range(spec.windows):
        picked = np.sort(rng.choice(n, size=width, replace=False))
        window_rows = np.arange(w * spec.blk_h, (w + 1) * spec.blk_h)
        rows.append(np.repeat(window_rows, width))
        cols.append(np.tile(picked, spec.blk_h))
    return CsrGraph.from_coo(n, np.concatenate(rows), np.concatenate(cols))


def parse_synthetic(text: str) -> SyntheticSpec:
    """Parse ``random:n=256,p=0.02,seed=1`` or ``blockdense:windows=4,tiles=2``."""
    kind, _, params = text.partition(":")
    fields: dict[str, str] = {}
    for item in filter(None, params.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ParseError(f"bad synthetic parameter {item!r} in {text!r}")
        fields[key.strip()] = value.strip()
    try:
        if kind == "random":
            return RandomSpec(int(fields["n"]), float(fields["p"]), int(fields.get("seed", 0)))
        if kind == "blockdense":
            return BlockDenseSpec(
                int(fields["windows"]),
                int(fields.get("tiles", fields.get("tiles_per_window", 1))),
                int(fields.get("seed", 0)),
                int(fields.get("blk_h", DEFAULT_BLK_H)),
                int(fields.get("blk_w", DEFAULT_BLK_W)),
            )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad synthetic spec {text!r}: {exc}") from None
    raise ParseError(f"unknown synthetic kind {kind!r}; expected 'random' or 'blockdense'")


def is_synthetic(text: str) -> bool:
    return text.split(":", 1)[0] in ("random", "blockdense") and ":" in text


def reference_block_count(dataset: str) -> int | None:
    """Published 16x8 tile count for a dataset named like ``cora.npz``, if any."""
    if is_synthetic(dataset):
        return None
    stem = Path(dataset).name.lower().split(".", 1)[0]
    return REFERENCE_BLOCK_COUNTS.get(stem)


class DatasetService:
    """
    service class responsible for resolving dataset names into graphs and
    transformed graphs
    """

    def __init__(
        self,
        symmetrize: bool = False,
        add_self_loops: bool = False,
        dedupe: bool = True,
        workers: int = 1,
    ) -> None:
        self.symmetrize = symmetrize
        self.add_self_loops = add_self_loops
        self.dedupe = dedupe
        self.workers = workers
        # the transform is computed once and reused by every kernel, layer and repeat
        self._graph_cache: dict[str, CsrGraph] = {}
        self._transform_cache: dict[tuple[str, TileGeometry], TransformedGraph] = {}

    @staticmethod
    def expand(names: list[str]) -> list[str]:
        """Replace suite names by their member datasets."""
        out: list[str] = []
        for name in names:
            out.extend(SUITES.get(name, [name]))
        return out

    def get_graph(self, dataset: str) -> CsrGraph:
        cached = self._graph_cache.get(dataset)
        if cached is not None:
            return cached
        if is_synthetic(dataset):
            g = make_synthetic(parse_synthetic(dataset))
        else:
            path = Path(dataset)
            if not path.exists():
                raise GraphIOError(f"dataset {dataset!r} is neither a file nor a synthetic spec")
            if path.suffix.lower() == ".sgt":
                t = load_sgt(path)
                self._transform_cache[(dataset, t.geometry)] = t
                g = t.csr
            else:
                g = normalize_graph(
                    load_edge_list(path),
                    symmetrize=self.symmetrize,
                    add_self_loops=self.add_self_loops,
                    dedupe=self.dedupe,
                )
        logger.debug("Dataset %s -> %r", dataset, g)
        self._graph_cache[dataset] = g
        return g

    def get_transform(self, dataset: str, geometry: TileGeometry | None = None) -> TransformedGraph:
        """Transformed graph for *dataset*; without a geometry an SGT file keeps its own, anything else gets 16x8."""
        g = self.get_graph(dataset)
        if geometry is None:
            loaded = [t for (name, _), t in self._transform_cache.items() if name == dataset]
            if loaded:
                return loaded[0]
            geometry = TileGeometry()
        key = (dataset, geometry)
        cached = self._transform_cache.get(key)
        if cached is not None:
            return cached
        # an SGT file transformed at another width only needs its tiles recounted
        same_height = [t for (name, geom), t in self._transform_cache.items()
                       if name == dataset and geom.blk_h == geometry.blk_h]
        if same_height:
            t = reblock(same_height[0], geometry.blk_w)
        else:
            t = sgt_transform(g, geometry, self.workers)
        self._transform_cache[key] = t
        return t
