"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np

from .data import MAX_INTENSITY, N_BANDS, SpectralCube


def check_cubes(X) -> np.ndarray:
    """Coerce cubes to a float64 array (n, 9, H, W) scaled to [0, 1].

    Accepts a sequence of :class:`SpectralCube`, a single cube, or an array of
    shape (n, 9, H, W). Integer arrays are taken as raw 16-bit intensities and
    divided by 65535; float arrays must already be in [0, 1].
    """
    if isinstance(X, SpectralCube):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], SpectralCube):
        return np.stack([c.as_float() for c in X])
    arr = np.asarray(X)
    if arr.ndim != 4 or arr.shape[1] != N_BANDS:
        raise ValueError(f"expected cubes of shape (n, 9, H, W), got {arr.shape}")
    if arr.shape[2] % 4 or arr.shape[3] % 4:
        raise ValueError(f"cube size {arr.shape[2]}x{arr.shape[3]} is not a multiple of 4")
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.float64) / MAX_INTENSITY
    arr = arr.astype(np.float64)
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1):
        raise ValueError("float cubes must hold intensities in [0, 1]")
    return arr


def check_labels(y, n: int | None = None) -> np.ndarray:
    """Labels as an int array of +1 (bonafide) / -1 (attack)."""
    y = np.asarray(y).ravel()
    if n is not None and len(y) != n:
        raise ValueError(f"got {len(y)} labels for {n} samples")
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be +1 (bonafide) or -1 (attack)")
    return y.astype(np.int64)


def check_features(X, n_features: int | None = None) -> np.ndarray:
    x = np.asarray(X, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {x.shape}")
    if n_features is not None and x.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain NaN or inf")
    return x
