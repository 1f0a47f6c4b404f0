# Defaults shared by the library, the CLI and the viewer

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

DEFAULT_BLK_H = 16
DEFAULT_BLK_W = 8
SDDMM_BLK_W = 16  # edge-feature tiles are 16 x 16

DEFAULT_SPLIT = 1.0
DEFAULT_DIM = 16
DEFAULT_REPEATS = 5
DEFAULT_SEED = 0
DEFAULT_RUN_TIMEOUT_S = 120.0

ORACLE_RTOL = 1e-4
SOFTMAX_ATOL = 1e-6

THREADS_ENV = "SGTK_THREADS"

GCN_HIDDEN = 16
GCN_LAYERS = 2
AGNN_HIDDEN = 32
AGNN_LAYERS = 4

WEIGHT_INIT_BOUND = 0.1

# published 16x8 tile counts for the citation and co-purchase graphs;
# their preprocessing is unstated, so these are compared, never asserted
REFERENCE_BLOCK_COUNTS = {
    "citeseer": 659,
    "cora": 681,
    "amazon0505": 234206,
    "com-amazon": 124398,
    "amazon0601": 164737,
}

CSV_HEADER = (
    "dataset",
    "kernel",
    "path",
    "median_ms",
    "blocks",
    "capacity",
    "nnz",
    "density",
    "max_rel_err",
)

# stdout carries CSV/JSON; everything human-readable goes to stderr
console = Console(stderr=True)


def resolve_threads(value: int | None = None) -> int:
    """Explicit value wins, then $SGTK_THREADS, then 1."""
    if value is None:
        raw = os.environ.get(THREADS_ENV, "")
        try:
            value = int(raw) if raw else 1
        except ValueError:
            logging.getLogger(__name__).warning("Ignoring non-integer %s=%r", THREADS_ENV, raw)
            value = 1
    return max(1, int(value))


def setup_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=verbose)],
        force=True,
    )
