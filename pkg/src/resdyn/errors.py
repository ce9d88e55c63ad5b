"""Exception types shared across the package."""


class ResdynError(Exception):
    """Base class for all errors raised by this package."""


class InvalidTraceError(ResdynError, ValueError):
    """A functionality trace violates its structural invariants."""


class DomainError(ResdynError, ValueError):
    """An input lies outside the domain a model or operation supports."""


class UndefinedSteadyStateError(DomainError):
    """Both impact rates are zero, so no unique long-run level exists."""


class NoSwitchError(ResdynError, ValueError):
    """A trace has no interior minimum, so no switching time can be located."""


class FitFailureError(ResdynError, RuntimeError):
    """A fit system could not be solved to tolerance or gave infeasible rates."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals
