"""Exception hierarchy shared by the library and the command-line front end."""


class WaveDbnError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(WaveDbnError, ValueError):
    """A precondition on inputs, shapes or configuration values was violated."""

    exit_code = 1


class DataFormatError(WaveDbnError):
    """A dataset or image file is missing, truncated or malformed."""

    exit_code = 2


class ModelFormatError(WaveDbnError):
    """A model file could not be parsed.

    ``offset`` is the byte offset of the first offending line, when known.
    """

    exit_code = 2

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class NumericalError(WaveDbnError, ArithmeticError):
    """Training produced non-finite parameters."""

    exit_code = 3
