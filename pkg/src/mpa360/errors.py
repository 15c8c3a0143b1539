"""Exception classes shared across the package."""

from __future__ import annotations


class Mpa360Error(Exception):
    """Base class; ``error_class`` is the machine-readable name used by the CLI."""

    @property
    def error_class(self) -> str:
        return type(self).__name__


class GrazingRay(Mpa360Error):
    """A ray is (numerically) parallel to the real and virtual image planes."""


class NonRepresentable(Mpa360Error):
    """A motion vector cannot be expressed on the target plane without
    switching between the real and the virtual image plane."""


class DimensionMismatch(Mpa360Error, ValueError):
    pass


class FileTooShort(Mpa360Error):
    pass


class BadGeometry(Mpa360Error, ValueError):
    pass


class UsageError(Mpa360Error, ValueError):
    """Invalid command line or configuration file."""
