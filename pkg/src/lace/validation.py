"""Input validation helpers used at every public entry point."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = ["as_matrix", "as_vector", "check_finite", "check_count"]


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.isfinite(a).all():
        raise ValidationError(f"{name} contains NaN or Inf values")
    return a


def as_matrix(a, name: str = "matrix", *, dtype=np.float64) -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    out = np.asarray(a, dtype=dtype)
    if out.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {out.shape}")
    return check_finite(out, name)


def as_vector(a, name: str = "vector", *, dtype=np.float64) -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    out = np.asarray(a, dtype=dtype)
    if out.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {out.shape}")
    return check_finite(out, name)


def check_count(value: int, low: int, high: int, name: str):
    """Check an integer parameter against an inclusive range."""
    from .errors import RangeError

    if not low <= value <= high:
        raise RangeError(f"{name}={value} outside valid range [{low}, {high}]")
    return value
