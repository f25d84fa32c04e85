"""Exception hierarchy shared by every module.

The CLI maps each family onto an exit code, so new errors should subclass
one of the three roots below.
"""


class GPSSError(Exception):
    """Base class for all package errors."""


class ValidationError(GPSSError, ValueError):
    """A parameter record violates a stated hypothesis."""

    def __init__(self, name, inequality):
        self.name = name
        self.inequality = inequality
        super().__init__(f"{name}: {inequality}")


class DomainError(GPSSError, ValueError):
    """An operation was called outside the range where it is defined."""


class ConvergenceFailure(GPSSError, RuntimeError):
    """An iterative procedure stopped without reaching its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoSignChange(ConvergenceFailure):
    """Both ends of a shooting bracket classify identically."""


class SweepDegenerate(ConvergenceFailure):
    """Too many points of a bifurcation sweep failed to converge."""


class CurveMonotone(ConvergenceFailure):
    """No extrema could be located on a sampled eigenvalue curve."""


class WindowTooShort(GPSSError, ValueError):
    """A fitting window does not cover enough oscillation periods."""


class ExtrapolationError(DomainError):
    """A profile was evaluated outside its grid."""


class NoPlateau(UserWarning):
    """A far-field diagnostic did not settle on the sampled window."""
