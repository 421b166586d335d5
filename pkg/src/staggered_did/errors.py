"""Exception hierarchy.

Input problems map to CLI exit code 2, numerical degeneracy to exit code 3.
"""


class DidError(Exception):
    """Base class for all package errors."""


class InputError(DidError, ValueError):
    """Malformed or inconsistent user input."""


class DegenerateDesignError(DidError, ArithmeticError):
    """The requested quantity is undefined for this design or sample."""


class SingularSystemError(DegenerateDesignError):
    """A linear system is singular to working tolerance."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NotPSDError(DegenerateDesignError):
    """A covariance matrix failed the positive-semidefinite check."""


class SupportTooLargeError(InputError):
    """Exhaustive enumeration was refused by the size guard."""
