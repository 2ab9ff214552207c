"""Exception types shared across the package."""


class ResetLoopError(Exception):
    """Base class for all resetloop-specific errors."""


class SingularMatrixError(ResetLoopError):
    """A matrix that must be inverted is singular (or numerically so)."""


class UnsupportedConfigurationError(ResetLoopError):
    """A composition of reset elements that the library does not support."""


class ControllerSpecError(ResetLoopError):
    """Inconsistent or unknown controller specification."""


class DesignInfeasibleError(ResetLoopError):
    """A numeric design procedure could not meet its target."""


class TuningError(ResetLoopError):
    """Gain tuning failed (e.g. non-monotone magnitude near the target)."""


class MarginUndefinedError(ResetLoopError):
    """No (unique) gain crossover, so a phase margin cannot be reported."""


class UnstableLoopError(ResetLoopError):
    """The linear base closed loop is unstable; simulation refuses to run."""


class DivergenceError(ResetLoopError):
    """Simulation state grew without bound."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class FrfParseError(ResetLoopError):
    """Malformed frequency-response CSV."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class FitError(ResetLoopError):
    """Plant fit could not be computed."""
