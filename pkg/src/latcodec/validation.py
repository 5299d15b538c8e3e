"""Minimal input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_array(X, ndim=2, name="X"):
    """Coerce to a float array of the given rank and reject non-finite data."""
    X = np.asarray(X, dtype=float)
    if X.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {X.shape}")
    if X.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("invalid input")
    return X


def check_finite_scalar(value, name, minimum=None):
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if minimum is not None and value <= minimum:
        raise ValueError(f"{name} must be > {minimum}")
    return value
