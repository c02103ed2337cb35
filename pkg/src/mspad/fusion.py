"""Wavelet-domain fusion of the nine band images into one composite image."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import N_BANDS, SpectralCube
from .dwt import WaveletCoeffs2, dwt2_level2, idwt2_level2
from .validation import check_cubes


@dataclass(frozen=True, eq=False)
class FusionWeights:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if w.shape != (N_BANDS,):
            raise ValueError(f"need 9 fusion weights, got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("fusion weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"fusion weights must sum to 1, got {w.sum()!r}")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls) -> "FusionWeights":
        return cls(np.full(N_BANDS, 1.0 / N_BANDS))

    @classmethod
    def one_hot(cls, k: int) -> "FusionWeights":
        w = np.zeros(N_BANDS)
        w[k] = 1.0
        return cls(w)

    @classmethod
    def coerce(cls, weights) -> "FusionWeights":
        if weights is None:
            return cls.uniform()
        if isinstance(weights, FusionWeights):
            return weights
        return cls(weights)

    def tolist(self) -> list[float]:
        return [float(v) for v in self.w]


def fuse_coefficients(bands, weights: FusionWeights) -> WaveletCoeffs2:
    """Weighted blockwise sum of the bands' coefficients, accumulated in band order."""
    bands = np.asarray(bands, dtype=np.float64)
    acc = WaveletCoeffs2.zeros(bands.shape[1:])
    for wk, band in zip(weights.w, bands):
        acc = acc.scale_add(dwt2_level2(band), wk)
    return acc


def fuse_bands(bands, weights=None, clip: bool = True) -> np.ndarray:
    """Fuse a (9, H, W) float stack in [0, 1]; ``clip=False`` skips the final clamp."""
    fused = idwt2_level2(fuse_coefficients(bands, FusionWeights.coerce(weights)))
    return np.clip(fused, 0.0, 1.0) if clip else fused


def fuse_cube(cube: SpectralCube, weights=None, clip: bool = True) -> np.ndarray:
    """Fused image of ``cube`` with values in [0, 1] (uniform weights by default)."""
    return fuse_bands(cube.as_float(), weights, clip)


class WaveletFusion(TransformerMixin, BaseEstimator):
    """Map cubes (n, 9, H, W) to fused images (n, H, W)."""

    def __init__(self, weights=None):
        self.weights = weights

    def fit(self, X, y=None):
        self.weights_ = FusionWeights.coerce(self.weights)
        return self

    def transform(self, X):
        weights = getattr(self, "weights_", None) or FusionWeights.coerce(self.weights)
        cubes = check_cubes(X)
        return np.stack([fuse_bands(c, weights) for c in cubes]) if len(cubes) \
            else np.zeros((0,) + cubes.shape[2:])
