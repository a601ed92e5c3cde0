"""Exception types shared across the package."""


class SipControlError(Exception):
    """Base class for package errors."""


class DomainError(SipControlError, ValueError):
    """An argument lies outside its mathematical domain (e.g. t not in [0, T])."""


class ConstructionError(SipControlError, ValueError):
    """An object cannot be built from the given data (bad shapes, even N, ...)."""


class NumericalError(SipControlError, RuntimeError):
    """A numerical routine failed to meet its tolerance or produced non-finite values."""


class ValidationError(SipControlError, ValueError):
    """A problem instance was rejected by validation."""


class InfeasibleError(SipControlError, RuntimeError):
    """No feasible point could be found."""


class OracleError(SipControlError, RuntimeError):
    """An independent reference computation (oracle) failed."""
