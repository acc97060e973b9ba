"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: :class:`DataError` signals a problem
with the input data (exit code 3) while :class:`NumericError` signals an
estimation or numeric failure on otherwise valid data (exit code 4).
"""

from __future__ import annotations

__all__ = ["OptcutError", "DataError", "NumericError"]


class OptcutError(Exception):
    """Base class for all package-specific errors."""


class DataError(OptcutError):
    """Invalid or unusable input data (ingestion, labels, degenerate classes)."""


class NumericError(OptcutError):
    """Estimation or numeric failure (undefined metrics, degenerate bandwidths)."""
