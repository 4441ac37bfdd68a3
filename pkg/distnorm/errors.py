"""
Exceptions raised by distnorm.

Validation failures carry the name of the violated invariant and the size of
the violation so callers (and the CLI) can report them without parsing text.
"""

from __future__ import annotations

from typing import Optional


class DistnormError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DistnormError):
    """An object violates one of its declared invariants."""

    def __init__(self, message: str, invariant: str = "", magnitude: Optional[float] = None):
        super().__init__(message)
        self.invariant = invariant
        self.magnitude = magnitude

    def __str__(self) -> str:
        text = super().__str__()
        if self.magnitude is not None:
            return f"{text} (invariant={self.invariant}, magnitude={self.magnitude:.3e})"
        return text


class DimensionError(ValidationError):
    """Dimension mismatch, missing bipartite shape, or a size cap exceeded."""


class UnsupportedDimensionError(DimensionError):
    """The construction exists in principle but is not provided for this dimension."""


class SampleSizeError(ValidationError):
    """Too few Monte-Carlo samples were requested."""


class ConfigError(DistnormError):
    """Bad configuration key or value."""


class FileFormatError(DistnormError):
    """A JSON input file could not be parsed or failed its schema."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class AuditViolation(DistnormError):
    """An audit found at least one failed bound."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(f"{len(self.violations)} bound violation(s): {self.violations[:3]}")
