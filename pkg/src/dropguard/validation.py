"""Input validation helpers.

Images flow through the package as float64 arrays of shape (N, H, W, C)
with every pixel in [0, 1]; labels as int arrays of shape (N,).  These
helpers normalize user input to that convention and fail early, with the
offending axis named, when it cannot be done.
"""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import ShapeError

__all__ = [
    "as_image_batch",
    "check_finite",
    "check_labels",
    "check_pixel_range",
    "check_rate",
]


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_rate(rate: float, name: str = "rate") -> float:
    """A dropout rate lives in [0, 1); the keep probability must be positive."""
    rate = float(rate)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"{name} must be in [0, 1), got {rate}")
    return rate


def check_pixel_range(x: np.ndarray, name: str = "images") -> np.ndarray:
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError(f"{name} must have every pixel in [0, 1]")
    return x


def as_image_batch(X, input_shape, name: str = "X") -> tuple[np.ndarray, bool]:
    """Coerce X to a float64 batch (N, H, W, C) matching ``input_shape``.

    Accepts a single image (H, W, C), a batch (N, H, W, C), or the flat
    2-D layout (N, H*W*C) that sklearn pipelines hand around.  Returns the
    batch and a flag telling whether the input was a single image.
    """
    X = check_array(X, allow_nd=True, dtype=np.float64, ensure_2d=False)
    h, w, c = input_shape
    single = False
    if X.ndim == 1 and X.size == h * w * c:
        X = X.reshape(1, h, w, c)
        single = True
    elif X.ndim == 2:
        if X.shape[1] != h * w * c:
            raise ShapeError(
                f"{name} axis 1 has {X.shape[1]} features, expected {h * w * c}"
            )
        X = X.reshape(-1, h, w, c)
    elif X.ndim == 3:
        if X.shape != (h, w, c):
            raise ShapeError(f"{name} has shape {X.shape}, expected {(h, w, c)}")
        X = X[None]
        single = True
    elif X.ndim == 4:
        if X.shape[1:] != (h, w, c):
            raise ShapeError(
                f"{name} axes 1:4 have shape {X.shape[1:]}, expected {(h, w, c)}"
            )
    else:
        raise ShapeError(f"{name} must have 1 to 4 axes, got {X.ndim}")
    check_finite(X, name)
    return X, single


def check_labels(y, n_classes: int, n_examples: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got {y.ndim} axes")
    if n_examples is not None and len(y) != n_examples:
        raise ShapeError(f"label axis 0 has {len(y)} entries, expected {n_examples}")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return y
