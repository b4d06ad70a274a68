"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError and DomainError -> 1,
CapacityError -> 2, anything else -> 3.
"""


class BCPError(Exception):
    """Base class for package errors."""


class ValidationError(BCPError, ValueError):
    """Malformed input: bad config, bad graph literal, inconsistent arguments."""


class DomainError(ValidationError):
    """A parameter lies outside the domain where an operation is defined."""


class CapacityError(BCPError):
    """An exhaustive computation would exceed its configured size limit."""


class PositivityError(DomainError):
    """A lattice-condition check was handed a measure with a zero atom."""
