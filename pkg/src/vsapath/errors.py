"""Exception hierarchy shared across the toolkit.

Everything user-facing derives from VsapathError so callers (and the CLI)
can map failures onto the three non-zero exit classes: validation problems,
I/O / format problems, and transport problems.
"""

from __future__ import annotations


class VsapathError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VsapathError):
    """Invalid configuration value or combination."""


class FamilyMismatchError(VsapathError):
    """Operands belong to different operator families or dimensions."""


class UnknownSymbolError(VsapathError):
    """A symbol was looked up that the codebook does not contain."""


class DuplicateSymbolError(VsapathError):
    """The same symbol name was supplied twice to a codebook build."""


class ZeroNormError(VsapathError):
    """A block or vector with zero norm cannot be normalized or compared."""


class FormatError(VsapathError):
    """A file or stream violates its documented format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TransportError(VsapathError):
    """The LLM endpoint could not be reached or violated the wire protocol."""


class ResponseParseError(VsapathError):
    """An LLM response did not contain the required labeled sections."""

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)
