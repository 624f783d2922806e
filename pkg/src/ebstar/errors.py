"""Exception types shared across the package."""


class EbstarError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(EbstarError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(EbstarError):
    """A data file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class OrderingError(EbstarError):
    """A sequence that must be sorted or strictly monotonic is not."""


class OutOfRangeError(EbstarError):
    """A query time falls outside the span of the backing table."""


class InsufficientDataError(EbstarError):
    """Not enough inputs to perform the operation (anchors, stars, samples...)."""


class ClockSkewError(EbstarError):
    """A time-map segment slope falls outside the clock-skew sanity bound."""


class DegenerateDecompositionError(EbstarError):
    """Swing/twist decomposition is undefined for this rotation/axis pair."""


class LostInSpaceError(EbstarError):
    """Tracker initialized with an attitude that sees no catalog stars."""


class ConfigError(EbstarError):
    """Run configuration file is malformed or contains unknown keys."""
