"""Exception hierarchy shared across the package.

Validation problems (bad files, bad flags, bad data) map to CLI exit
code 2; numerical failures map to exit code 3.
"""


class ShdpError(Exception):
    """Base class for all package errors."""


class ValidationError(ShdpError, ValueError):
    """Invalid input data, configuration, or arguments."""


class DegenerateTraceError(ValidationError):
    """Chain traces cannot support the requested diagnostic."""


class NumericalError(ShdpError, RuntimeError):
    """A numerical computation produced zero or non-finite results."""


class OptimizationError(NumericalError):
    """Optimizer failed to converge or encountered a bad iterate.

    Carries the last iterate so callers can inspect where it stalled.
    """

    def __init__(self, message, last_iterate=None, iterations=None, grad_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations
        self.grad_norm = grad_norm
