"""Exception hierarchy shared across the package.

Every error raised by this package derives from :class:`RecallForgeError`,
so callers can catch one base class at pipeline boundaries.  The CLI maps
each subclass to a distinct exit code.
"""


class RecallForgeError(Exception):
    """Base class for all package errors."""


class ShapeError(RecallForgeError):
    """Array dimensions do not match the operation's contract."""


class DomainError(RecallForgeError):
    """Numerically invalid input, e.g. a vector below the norm floor."""


class ArgumentError(RecallForgeError):
    """An argument violates a precondition (bad k, non-positive step, ...)."""


class DataError(RecallForgeError):
    """Inconsistent or missing data: unknown ids, absent ground truth, orphans."""


class MissingInputError(RecallForgeError):
    """A required stage artifact does not exist yet (run the earlier stage)."""


class ConfigError(RecallForgeError):
    """Configuration file or flag combination cannot be used."""


class OracleTransportError(RecallForgeError):
    """The oracle backend was unreachable after retries (retryable condition)."""


class OracleProtocolError(RecallForgeError):
    """The oracle returned a payload that violates the wire contract."""


class TrainingDivergedError(RecallForgeError):
    """Optimization produced a non-finite loss."""
