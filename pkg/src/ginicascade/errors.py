"""Exception types shared across the package.

Every error raised on a contract violation derives from GiniCascadeError so
callers (CLI, service) can map failures to exit codes / HTTP statuses in one
place.
"""


class GiniCascadeError(Exception):
    """Base class for all package errors."""


class ConfigError(GiniCascadeError):
    """Bad or inconsistent configuration."""


class DataError(GiniCascadeError):
    """Bad input data (parsing, shapes, empty sets)."""


class ParseError(DataError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyFile(DataError):
    pass


class ZeroFirstClose(DataError):
    pass


class MissingBaseline(DataError):
    def __init__(self, ticker: str):
        self.ticker = ticker
        super().__init__(f"no volume baseline for ticker {ticker!r}")


class LengthMismatch(DataError):
    pass


class EmptyInterval(DataError):
    pass


class InsufficientReference(DataError):
    pass


class EmptyTrainSet(DataError):
    pass


class TooFewEras(DataError):
    pass


class TooFewRows(DataError):
    pass


class NonFiniteGradient(GiniCascadeError):
    """An analytic or finite-difference gradient came out NaN/Inf."""


class DivergedLoss(GiniCascadeError):
    """Training loss became non-finite."""


class IoError(GiniCascadeError):
    """Failed to read or write an artifact file."""
