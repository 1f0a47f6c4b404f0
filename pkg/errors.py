class SgtkError(Exception):
    """Base class for every error raised by the toolkit."""


class GraphIOError(SgtkError, OSError):
    """A graph or artifact file could not be read or written."""


class ParseError(SgtkError, ValueError):
    """Malformed input file; *line* is 1-based (0 when not line-oriented)."""

    def __init__(self, message: str, line: int = 0, path: str | None = None) -> None:
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        prefix = f"{where}{line}: " if line else (f"{path}: " if path else "")
        super().__init__(f"{prefix}{message}")


class NodeIdOverflowError(SgtkError, OverflowError):
    """A node id does not fit in 32 bits."""


class DegreeError(SgtkError, ValueError):
    """A row has no edges where normalization needs a positive degree."""


class GeometryError(SgtkError, ValueError):
    """Invalid tile geometry (zero height or width)."""


class RangeError(SgtkError, ValueError):
    """A numeric argument lies outside its admissible range."""


class ShapeError(SgtkError, ValueError):
    """Operand shapes do not agree."""


class NonFiniteError(SgtkError, ArithmeticError):
    """A kernel produced NaN or Inf."""


class TileIndexError(SgtkError, IndexError):
    """Window or tile index out of range."""


class FormatError(SgtkError, ValueError):
    """A binary artifact (SGT1 file, weight file) is corrupt or truncated."""


class BenchTimeoutError(SgtkError, TimeoutError):
    """A timed run exceeded its cap."""


class VerificationError(SgtkError):
    """A result disagrees with its reference beyond tolerance."""

    def __init__(self, message: str, index: tuple | int | None = None,
                 got: float | None = None, expected: float | None = None) -> None:
        self.index = index
        self.got = got
        self.expected = expected
        detail = ""
        if index is not None:
            detail = f" (worst at {index}: got {got!r}, expected {expected!r})"
        super().__init__(f"{message}{detail}")


class DegenerateRowWarning(UserWarning):
    """Zero-norm feature rows were normalized to zero vectors."""
