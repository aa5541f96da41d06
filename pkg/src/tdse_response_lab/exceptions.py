"""Custom exceptions for the TDSE response lab.

This module defines custom exception classes for better error handling
and more specific error reporting.
"""


class TDSELabError(Exception):
    """Base exception for the TDSE response lab."""

    pass


class ConfigurationError(TDSELabError):
    """Raised when a scenario file cannot be parsed or validated."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        """Initialize ConfigurationError with message and optional field/line."""
        super().__init__(message)
        self.field = field
        self.line = line


class ExpressionError(ConfigurationError):
    """Raised when a closed-form field expression is rejected."""

    def __init__(self, message: str, expression: str | None = None, field: str | None = None):
        """Initialize ExpressionError with message and the offending expression."""
        super().__init__(message, field=field)
        self.expression = expression


class ValidationError(TDSELabError):
    """Raised when input validation fails."""

    def __init__(self, message: str, field: str | None = None, value: object | None = None):
        """Initialize ValidationError with message and optional field/value."""
        super().__init__(message)
        self.field = field
        self.value = value


class GridMismatchError(ValidationError):
    """Raised when operands live on different grids or time lattices."""

    pass


class ExponentError(ValidationError):
    """Raised when an exponent set is out of range or infeasible."""

    pass


class SizeGuardError(ValidationError):
    """Raised when a dense kernel would exceed the configured size."""

    def __init__(self, message: str, size: int | None = None, limit: int | None = None):
        """Initialize SizeGuardError with the requested size and the limit."""
        super().__init__(message, field="grid", value=size)
        self.size = size
        self.limit = limit


class SolverError(TDSELabError):
    """Raised when a time-stepping solver fails."""

    pass


class ContractionError(SolverError):
    """Raised when the Picard iteration stops contracting."""

    def __init__(self, message: str, factor: float | None = None, iteration: int | None = None):
        """Initialize ContractionError with the measured contraction factor."""
        super().__init__(message)
        self.factor = factor
        self.iteration = iteration


class ConvergenceError(SolverError):
    """Raised when the Picard iteration exhausts its iteration budget."""

    def __init__(self, message: str, residual: float | None = None, iteration: int | None = None):
        """Initialize ConvergenceError with the last residual."""
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration


class EstimateError(TDSELabError):
    """Raised when a constant estimate or bound check cannot be formed."""

    pass


class BoundViolationError(TDSELabError):
    """Raised when a verified bound reports lhs > rhs."""

    def __init__(self, message: str, violations: int = 0):
        """Initialize BoundViolationError with the number of violated reports."""
        super().__init__(message)
        self.violations = violations
