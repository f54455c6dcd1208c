"""Exception types shared across the package."""


class LatfuseError(Exception):
    """Base class for all latfuse errors."""


class InvalidInputError(LatfuseError, ValueError):
    """Raised for malformed inputs: bad shapes, non-finite entries, bad paths."""


class NumericalError(LatfuseError, ArithmeticError):
    """Raised when a numerical routine diverges or fails to converge internally."""
