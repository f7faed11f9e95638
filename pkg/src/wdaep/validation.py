"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def check_image(u, *, name: str = "image", complex_: bool = True) -> np.ndarray:
    """Return ``u`` as a finite 2D float64/complex128 array."""
    dtype = np.complex128 if complex_ else np.float64
    arr = np.asarray(u)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2D, got shape {arr.shape}")
    if not complex_ and np.iscomplexobj(arr):
        raise ShapeError(f"{name} must be real-valued")
    arr = arr.astype(dtype, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_tensor(x, *, channels: int | None = None, name: str = "tensor") -> np.ndarray:
    """Return ``x`` as a float64 array shaped (C, H, W) or (N, C, H, W)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (3, 4):
        raise ShapeError(f"{name} must have shape (C, H, W) or (N, C, H, W), got {arr.shape}")
    if channels is not None and arr.shape[-3] != channels:
        raise ShapeError(f"{name} has {arr.shape[-3]} channels, expected {channels}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, names=("a", "b")) -> None:
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"{names[0]} shape {np.shape(a)} does not match {names[1]} shape {np.shape(b)}")


def check_random_state(seed) -> np.random.Generator:
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
