"""Exception types shared across the package.

Every error carries a stable ``category`` slug so the CLI and the HTTP
service can report machine-readable error classes.
"""


class NoisevolveError(Exception):
    """Base class for all package errors."""

    category = "error"


class NoImages(NoisevolveError):
    category = "no_images"


class InvalidSpec(NoisevolveError, ValueError):
    category = "invalid_spec"


class InvalidInput(NoisevolveError, ValueError):
    category = "invalid_input"


class InvalidK(NoisevolveError, ValueError):
    category = "invalid_k"


class RejectionStuck(NoisevolveError, RuntimeError):
    category = "rejection_stuck"


class InvalidSchedule(NoisevolveError, ValueError):
    category = "invalid_schedule"


class InvalidState(NoisevolveError, RuntimeError):
    category = "invalid_state"


class UndefinedCorrelation(NoisevolveError, ValueError):
    category = "undefined_correlation"


class DegenerateCriterion(NoisevolveError, RuntimeError):
    category = "degenerate_criterion"


class InsufficientVariation(NoisevolveError, ValueError):
    category = "insufficient_variation"


class NotReady(NoisevolveError, RuntimeError):
    category = "not_ready"


class Conflict(NoisevolveError, RuntimeError):
    category = "conflict"


class NotFound(NoisevolveError, LookupError):
    category = "not_found"


class Gone(NoisevolveError, RuntimeError):
    category = "gone"


class TooEarly(NoisevolveError, RuntimeError):
    category = "too_early"


class AwaitAdvance(NoisevolveError, RuntimeError):
    """The current generation is fully answered; call advance first."""

    category = "await_advance"
