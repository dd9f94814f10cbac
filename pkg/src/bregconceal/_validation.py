"""Input validation helpers shared by the public functions and estimators."""

import numpy as np

from .exceptions import DimensionMismatchError, DomainError


def check_frame(frame, name="frame"):
    """Return ``frame`` as a finite 2-D float64 array (rows are ``v``)."""
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DomainError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_mask(mask, shape, name="mask"):
    arr = np.asarray(mask, dtype=bool)
    if arr.shape != tuple(shape):
        raise DimensionMismatchError(
            f"{name} has shape {arr.shape}, expected {tuple(shape)}"
        )
    return arr


def check_same_shape(*arrays, names=None):
    shapes = [np.shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        label = ", ".join(names) if names else "arrays"
        raise DimensionMismatchError(f"shape mismatch between {label}: {shapes}")


def check_positive(arr, floor, name):
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    if arr.size and arr.min() < floor:
        raise DomainError(f"{name} has entries below the floor {floor:g}: min={arr.min():g}")
    return arr
