"""Exception types shared across the package."""


class WtnError(Exception):
    """Base class for all package errors."""


class ParseError(WtnError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(WtnError):
    """Input violates a precondition (bad value, unknown id, bad flag)."""


class EmptyDataError(WtnError):
    """No usable data: zero rows or zero total trade volume."""


class ConvergenceError(WtnError):
    """Iterative solver did not reach tolerance. Carries the last residual."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)
