"""Exception hierarchy shared by every module of the package."""


class CarlemanError(Exception):
    """Base class for all errors raised by this package."""


class CapacityError(CarlemanError):
    """An object would exceed the configured element-count ceiling."""


class ConvergenceError(CarlemanError):
    """An iterative method hit its iteration cap.

    The last iterate is kept on ``last_iterate`` so callers can inspect it.
    """

    def __init__(self, message, last_iterate=None, estimate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.estimate = estimate


class DimensionError(CarlemanError, ValueError):
    """Matrix or vector dimensions are inconsistent."""


class SpecError(CarlemanError, ValueError):
    """An ODE specification file could not be parsed or validated."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DissipationError(CarlemanError, ValueError):
    """The linear part is not dissipative (Re(lambda_1) >= 0)."""


class BlowUpError(CarlemanError, ArithmeticError):
    """A time integration produced a non-finite state."""

    def __init__(self, message, last_finite_time, step=None):
        super().__init__(message)
        self.last_finite_time = last_finite_time
        self.step = step


class ResidualError(CarlemanError, ArithmeticError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SingularMatrixError(CarlemanError, ArithmeticError):
    pass


class ZeroNormError(CarlemanError, ZeroDivisionError):
    """A normalisation was requested for a zero vector."""
