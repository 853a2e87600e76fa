"""Input validation helpers shared by the feature, network and estimator code."""

import numpy as np


def check_series(x, name="series", allow_batch=False):
    """Return ``x`` as a finite float64 array.

    With ``allow_batch`` the last axis is the series axis and any leading
    axes are treated as a batch.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 or (arr.ndim > 1 and not allow_batch):
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[-1] == 0:
        raise ValueError("empty series")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def check_positive_int(value, name):
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_image_batch(X, shape, name="X"):
    """Coerce ``X`` to ``(n, *shape)``; accepts flattened rows or a single image."""
    arr = np.asarray(X)
    size = int(np.prod(shape))
    if arr.shape == tuple(shape):
        arr = arr[None]
    elif arr.ndim == 2 and arr.shape[1] == size:
        arr = arr.reshape((arr.shape[0],) + tuple(shape))
    if arr.shape[1:] != tuple(shape):
        raise ValueError(f"{name} must have image shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
