"""Exception types raised across the package."""


class DegenerateInputError(ValueError):
    """Input data is structurally valid but statistically degenerate (e.g. zero variance)."""


class FormatError(ValueError):
    """A file or config does not match its documented schema."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericalError(ArithmeticError):
    """A linear solve or factorization failed."""
