"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`GalaxyBenchError`
so callers (notably the CLI) can separate usage problems from runtime
failures with a single except clause.
"""


class GalaxyBenchError(Exception):
    """Base class for all library errors."""


class AlreadyLabeled(GalaxyBenchError):
    """A sample id was marked labeled twice."""


class UnknownId(GalaxyBenchError):
    """A sample id does not exist in the pool in question."""


class PoolExhausted(GalaxyBenchError):
    """A query was requested but no unlabeled samples remain."""


class BudgetExceeded(GalaxyBenchError):
    """A first-time oracle query arrived after the label budget was spent."""


class DegenerateInput(GalaxyBenchError):
    """Training data contains non-finite feature values."""


class DimensionMismatch(GalaxyBenchError):
    """Feature vector dimension does not match the model or dataset."""


class ClassTooSmall(GalaxyBenchError):
    """A class has fewer members than the requested per-class test size."""

    def __init__(self, class_index: int, have: int, need: int):
        self.class_index = class_index
        self.have = have
        self.need = need
        super().__init__(
            f"class {class_index} has {have} members, "
            f"need at least {need} for the test split"
        )


class FormatError(GalaxyBenchError):
    """A dataset file violates the expected CSV layout."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoInteriorUnlabeled(GalaxyBenchError):
    """A bisection step was requested on a segment with no unlabeled interior."""


class GridMismatch(GalaxyBenchError):
    """Run results do not share a common iteration grid and cannot be aggregated."""


class ConfigError(GalaxyBenchError):
    """An experiment configuration is invalid."""


class MissingArtifacts(GalaxyBenchError):
    """A report was requested over a directory without harness outputs."""
