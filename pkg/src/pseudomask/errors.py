"""Exception types shared across the package."""


class PseudomaskError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PseudomaskError, ValueError):
    """An argument violates an operation's precondition."""


class DegenerateDataError(PseudomaskError, ValueError):
    """Data is well-formed but cannot support the requested computation."""


class ParseError(InvalidInputError):
    """A file could not be parsed; ``field`` names the offending part."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InvariantViolation(PseudomaskError, RuntimeError):
    """An internal consistency check failed."""
