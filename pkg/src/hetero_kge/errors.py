"""Exception hierarchy shared across the engine.

The CLI maps these onto its exit-code contract: user/config/data problems
exit with 2, numeric failures during training exit with 3.
"""


class KGEError(Exception):
    """Base class for all engine errors."""


class ParseError(KGEError):
    """A file could not be parsed; carries path and 1-based line number."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class SchemaError(KGEError):
    """Entity/relation type constraint violated."""


class ResolutionError(KGEError):
    """Reference to an unknown entity, relation or vector row."""


class ConfigError(KGEError):
    """Invalid configuration value or combination."""


class SamplingError(KGEError):
    """Negative sampling cannot produce a valid corruption."""


class DataError(KGEError):
    """Invalid numeric data (NaN/Inf) where finite values are required."""


class NumericError(KGEError):
    """Training diverged (non-finite loss); carries the offending step."""

    def __init__(self, message, epoch=None, step=None):
        self.epoch = epoch
        self.step = step
        super().__init__(message)
