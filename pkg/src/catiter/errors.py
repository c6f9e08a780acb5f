"""Exception hierarchy shared by every module."""


class CatIterError(Exception):
    """Base class for all errors raised by catiter."""


class ConstructionError(CatIterError, ValueError):
    """A space, set, map or schedule was described with invalid parameters."""


class ValidationError(CatIterError, ValueError):
    """A coordinate vector violates the representation constraint of its space."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class DomainError(CatIterError, ValueError):
    """An operation was requested outside the region where it is well defined."""


class PreconditionError(CatIterError, ValueError):
    """A hypothesis of an inequality check does not hold for the given sample."""

    def __init__(self, message, failed=None):
        super().__init__(message)
        self.failed = failed


class EstimationError(CatIterError, RuntimeError):
    """A sampling estimator had no usable samples."""


class IntegrityError(CatIterError, RuntimeError):
    """Stored trace data disagrees with a recomputation."""


class UnsupportedError(CatIterError, RuntimeError):
    """The operation needs data the caller did not supply (e.g. a known fixed set)."""


class ConfigError(CatIterError, ValueError):
    """An experiment configuration could not be parsed or is inconsistent."""


class ArgumentError(CatIterError, ValueError):
    """A scalar argument lies outside its admissible range."""


class ScheduleExhausted(CatIterError, IndexError):
    """A tabulated schedule ran out of values and has no tail rule."""
