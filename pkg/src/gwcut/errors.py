"""Exception types shared across the package."""


class GWCutError(Exception):
    """Base class for all package errors."""


class PreconditionError(GWCutError, ValueError):
    """An operation was called with arguments outside its domain."""


class SamplingError(GWCutError, RuntimeError):
    """A rejection sampler exhausted its attempt budget."""


class ModeError(GWCutError, ValueError):
    """A removal schedule of the wrong mode was supplied."""


class HorizonError(GWCutError, RuntimeError):
    """A mark sequence ran out before an estimator's stop condition was met."""
