"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise the
most specific class that applies.
"""

from __future__ import annotations


class XtdError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(XtdError):
    """Invalid or inconsistent run configuration."""


class ContainerError(XtdError):
    """Model/field container I/O failure."""


class VersionError(ContainerError):
    """Container declares an unsupported format version."""


class ChecksumError(ContainerError):
    """Stored checksum does not match the payload."""


class TruncatedFileError(ContainerError):
    """File ends before the declared payload does."""


class NumericError(XtdError):
    """A numerical procedure failed fatally (singular system, diverged solve)."""
