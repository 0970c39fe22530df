"""Exception types shared across the package."""

from __future__ import annotations


class JumptailError(Exception):
    """Base class for all errors raised by this package."""


class EvaluationError(JumptailError):
    """A model function returned a non-finite value.

    Carries the offending point so validation reports can pinpoint it.
    """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class QuadratureError(JumptailError):
    """Adaptive integration failed to meet its tolerance.

    The best estimate reached so far and its error estimate are attached.
    """

    def __init__(self, message: str, value: float = float("nan"),
                 error_estimate: float = float("inf"), evaluations: int = 0):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate
        self.evaluations = evaluations


class DivergenceError(QuadratureError):
    """The divergence detector fired (successive blocks kept growing)."""


class RootFindError(JumptailError):
    """Bracketing or iteration limits were exhausted in a scalar solve."""


class ConfigurationError(JumptailError):
    """An operation was called with an incompatible model/truncation setup."""


class MomentConditionError(JumptailError):
    """An exponential-moment integral required for pricing diverges."""


class CalibrationError(JumptailError):
    """The drift does not satisfy the martingale restriction to tolerance."""
