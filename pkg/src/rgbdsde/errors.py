"""Exception hierarchy shared by every module."""


class RgbdsdeError(Exception):
    """Base class for all library errors."""


class ConfigurationError(RgbdsdeError, ValueError):
    """Invalid parameters, configuration documents or problem data."""


class PreconditionError(RgbdsdeError, ValueError):
    """An operation was called outside its documented domain."""


class NumericError(RgbdsdeError, ArithmeticError):
    """Non-finite values or a failed linear-algebra step."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class AssumptionError(RgbdsdeError):
    """The problem data violates a standing assumption; carries the report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(RgbdsdeError):
    """An iteration did not reach its tolerance."""

    def __init__(self, message, history=None, residual=None):
        super().__init__(message)
        self.history = list(history or [])
        self.residual = residual
