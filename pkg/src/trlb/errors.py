"""Exception types shared across the package."""


class TrlbError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(TrlbError, ValueError):
    """An argument or data value violates a documented precondition."""


class ParseError(TrlbError, ValueError):
    """A text input could not be parsed; the message names the line."""


class FormatError(TrlbError, ValueError):
    """A binary checkpoint is corrupt, truncated, or of the wrong format."""


class NumericError(TrlbError, ArithmeticError):
    """Training produced a non-finite value; carries the failing epoch."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
