"""Exception hierarchy shared across the package.

InputError (and subclasses) map to CLI exit code 2, everything else
derived from TashkeelError maps to exit code 1.
"""


class TashkeelError(Exception):
    """Base class for all package errors."""


class InputError(TashkeelError):
    """Bad user input: missing files, malformed documents, bad flags."""


class FormatError(InputError):
    """A file violates one of the on-disk format contracts."""


class XmlParseError(InputError):
    """Malformed XML input; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class ShapeError(TashkeelError):
    """Operands with non-conforming shapes were passed to a matrix op."""


class NonFiniteError(TashkeelError):
    """A NaN or Inf value showed up where only finite values are allowed."""


class TrainingError(TashkeelError):
    """Training aborted; the last good checkpoint is retained if one exists."""
