"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_float_vector(x, name: str, length: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a contiguous 1-D float64 array, checking its length."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def as_float_matrix(x, name: str, shape: tuple[int | None, int | None] = (None, None)) -> np.ndarray:
    """Coerce ``x`` to a contiguous 2-D float64 array, checking its shape."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    rows, cols = shape
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    return arr


def as_signal_matrix(data, name: str = "data") -> np.ndarray:
    """Coerce signals to an (N, T) float64 matrix.

    Accepts a 2-D array, a single 1-D signal, or a sequence of objects
    carrying a ``values`` attribute (e.g. ``ImageSignal``).
    """
    if isinstance(data, np.ndarray):
        if data.ndim == 1:
            data = data[None, :]
        return as_float_matrix(data, name)
    if hasattr(data, "values") and not isinstance(data, (list, tuple)):
        return as_signal_matrix(np.asarray(data.values), name)
    rows = [getattr(s, "values", s) for s in data]
    if not rows:
        raise ValueError(f"{name} must contain at least one signal")
    return as_float_matrix(np.asarray(rows, dtype=np.float64), name)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0
