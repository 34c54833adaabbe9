"""
Exception hierarchy shared by every threshold-lab module.

The command-line front end maps these classes to exit codes:
input problems exit with 2, numerical failures with 1 and violated structural
facts with 3.
"""
from typing import Optional


class ThresholdLabError(Exception):
    """Base class for all errors raised by threshold-lab."""


class ConfigurationError(ThresholdLabError, ValueError):
    """Invalid centres, strengths, run files or numerical settings."""


class DomainError(ThresholdLabError, ValueError):
    """Non-finite input or a spectral parameter outside the closed upper half-plane."""


class SingularityError(ThresholdLabError, ValueError):
    """Evaluation at a singular point (z = 0, x = 0, x at a centre, x = y)."""


class WrongCaseError(ThresholdLabError):
    """An operation was requested for a threshold case it does not cover."""

    def __init__(self, message: str, hint: Optional[str] = None) -> None:
        self.hint = hint
        super().__init__(f"{message} ({hint})" if hint else message)


class DesignError(ThresholdLabError):
    """Inverse design of the strengths is impossible for the given centres."""

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        self.index = index
        super().__init__(message)


class InternalInconsistencyError(ThresholdLabError):
    """A structural identity that must hold exactly failed numerically."""


class NumericalError(ThresholdLabError):
    """Generic numerical failure."""


class NearSingularError(NumericalError):
    """A matrix that must be inverted is singular within tolerance."""

    def __init__(self, message: str, sigma_min: float, condition: float) -> None:
        self.sigma_min = sigma_min
        self.condition = condition
        super().__init__(f"{message} (smallest singular value {sigma_min:.3e}, condition {condition:.3e})")


class PreconditionError(NumericalError):
    """A numerical precondition of an algorithm does not hold."""


class EigenvalueCollisionError(NumericalError):
    """The spectral parameter sits on (or numerically at) an eigenvalue."""


class TruncationError(NumericalError):
    """A sampled function has non-negligible mass beyond its grid."""


class ExtrapolationError(NumericalError):
    """Evaluation was requested outside the sampled grid."""
