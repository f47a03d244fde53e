"""Exception types shared by every module.

The CLI maps ValidationError to exit code 1 and every other failure to exit code 2.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union


class XLREError(Exception):
    """Base class for all library errors."""


class ValidationError(XLREError, ValueError):
    """Inputs violate a documented precondition or invariant."""


class FormatError(ValidationError):
    """A file does not follow its documented format."""

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class NumericError(XLREError, ArithmeticError):
    """Non-finite values or a numerically degenerate problem."""


class StageError(XLREError):
    """A failure inside one stage of an experiment run."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@contextmanager
def reading(path: Union[str, Path]) -> Iterator[None]:
    """Report undecodable bytes in a text file as a FormatError."""
    try:
        yield
    except UnicodeDecodeError as e:
        raise FormatError(f"not valid UTF-8 text (byte offset {e.start})", path) from e
