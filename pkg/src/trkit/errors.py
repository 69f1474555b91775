"""Exception hierarchy shared by the library and the CLI.

Each category carries the process exit code the CLI reports for it.
"""

from __future__ import annotations


class TrkitError(Exception):
    exit_code = 1


class SchemaError(TrkitError, ValueError):
    """Input record does not match its declared schema."""

    exit_code = 2


class InvariantFailure(TrkitError):
    exit_code = 3


class InputIOError(TrkitError, OSError):
    exit_code = 4


class InvalidRangeError(TrkitError, ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ParseError(TrkitError, ValueError):
    """No range could be extracted from model output text."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


class DegenerateAttentionError(TrkitError, ValueError):
    pass
