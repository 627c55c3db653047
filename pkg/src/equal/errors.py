"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class NumericalFailureError(ArithmeticError):
    """Raised when a factorization fails or an iterate stops being finite."""
