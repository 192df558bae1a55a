"""Shared exception types."""


class InputError(ValueError):
    """An input violates a documented precondition or file-format rule."""


class NumericalError(ArithmeticError):
    """A numerical routine failed: non-convergence or non-finite values."""
