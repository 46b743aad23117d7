"""Input validation helpers used across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import InputError


def as_matrix(X, name: str = "X", n_cols: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float array, raising InputError otherwise."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {X.shape}")
    if X.size and not np.all(np.isfinite(X)):
        raise InputError(f"{name} contains NaN or infinite values")
    if n_cols is not None and X.shape[1] != n_cols:
        raise InputError(f"{name} has {X.shape[1]} columns, expected {n_cols}")
    return X


def as_vector(x, name: str = "x", length: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size and not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains NaN or infinite values")
    if length is not None and x.size != length:
        raise InputError(f"{name} has length {x.size}, expected {length}")
    return x


def check_square(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains NaN or infinite values")
    return A


def check_one_hot(Z, name: str = "Z", n_classes: int | None = None) -> np.ndarray:
    """Validate a hard one-hot indicator matrix (each row sums to exactly 1)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {Z.shape}")
    if Z.size:
        if not np.all((Z == 0.0) | (Z == 1.0)):
            raise InputError(f"{name} must contain only 0/1 entries")
        if not np.all(Z.sum(axis=1) == 1.0):
            raise InputError(f"{name} rows must each sum to exactly 1")
    if n_classes is not None and Z.shape[1] != n_classes:
        raise InputError(f"{name} has {Z.shape[1]} columns, expected {n_classes}")
    return Z


def check_unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InputError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_partition(labels, name: str = "partition") -> np.ndarray:
    """Coerce integer class labels; values must be nonnegative ints."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise InputError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.issubdtype(arr.dtype, np.integer):
        as_int = arr.astype(int)
        if not np.array_equal(as_int, arr):
            raise InputError(f"{name} must contain integer class indices")
        arr = as_int
    if np.any(arr < 0):
        raise InputError(f"{name} must contain nonnegative class indices")
    return arr
