"""Exception types raised across the package."""


class CalderonError(Exception):
    """Base class for all package errors."""


class WindowError(CalderonError, ValueError):
    """An index or level lies outside the admissible window."""


class ParameterError(CalderonError, ValueError):
    """Inconsistent or unsupported space parameters."""


class DivergentIntegralError(CalderonError, ArithmeticError):
    """A weight (or a power of it) is not integrable over the requested region."""


class DegenerateFactorizationError(CalderonError):
    """The level-set construction is singular for these parameters and weights."""
