"""Exception types shared across the package.

CLI exit-code mapping: ContractViolationError (and subclasses) -> 1,
NumericalError (and subclasses) -> 2.
"""


class ContractViolationError(ValueError):
    """An input violates a documented precondition or invariant."""


class DomainError(ContractViolationError):
    """A scalar argument lies outside its mathematical domain."""


class ParseError(ContractViolationError):
    """A data file is malformed; carries the offending row when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class NumericalError(ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class SingularityError(NumericalError):
    """A linear solve hit a singular or near-singular system."""
