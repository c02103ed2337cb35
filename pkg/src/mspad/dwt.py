"""Two-level separable 2-D Haar wavelet transform with exact inverse.

Filters are l2-orthonormal (taps +-1/sqrt(2)), so a constant image ``c`` maps
to an approximation of ``2c`` after one level and ``4c`` after two, and the
transform preserves energy.

Detail orientation for a 2x2 block ``[[a, b], [c, d]]``::

    approx     = (a + b + c + d) / 2
    horizontal = (a + b - c - d) / 2    # top minus bottom row
    vertical   = (a - b + c - d) / 2    # left minus right column
    diagonal   = (a - b - c + d) / 2
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HAAR = "haar"


@dataclass(frozen=True, eq=False)
class WaveletCoeffs2:
    """Seven coefficient blocks of a two-level decomposition.

    ``h1, v1, d1`` are the level-1 details (H/2 x W/2); ``h2, v2, d2`` and
    ``approx`` come from the second level (H/4 x W/4).
    """

    approx: np.ndarray
    h1: np.ndarray
    v1: np.ndarray
    d1: np.ndarray
    h2: np.ndarray
    v2: np.ndarray
    d2: np.ndarray
    original_size: tuple[int, int]
    family: str = HAAR

    BLOCKS = ("approx", "h1", "v1", "d1", "h2", "v2", "d2")

    def __post_init__(self):
        h, w = self.original_size
        if h % 4 or w % 4 or h <= 0 or w <= 0:
            raise ValueError(f"original size {h}x{w} is not a positive multiple of 4")
        if self.family != HAAR:
            raise ValueError(f"unsupported wavelet family {self.family!r}")
        for name in self.BLOCKS:
            want = (h // 2, w // 2) if name in ("h1", "v1", "d1") else (h // 4, w // 4)
            got = np.shape(getattr(self, name))
            if got != want:
                raise ValueError(f"block {name} has shape {got}, expected {want}")

    def blocks(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in self.BLOCKS]

    def energy(self) -> float:
        return float(sum(np.sum(np.square(b)) for b in self.blocks()))

    def scale_add(self, other: "WaveletCoeffs2", weight: float) -> "WaveletCoeffs2":
        """Return ``self + weight * other`` blockwise."""
        if other.original_size != self.original_size:
            raise ValueError("coefficient sets come from images of different sizes")
        parts = {n: getattr(self, n) + weight * getattr(other, n) for n in self.BLOCKS}
        return WaveletCoeffs2(**parts, original_size=self.original_size, family=self.family)

    @classmethod
    def zeros(cls, original_size: tuple[int, int]) -> "WaveletCoeffs2":
        h, w = original_size
        half, quarter = np.zeros((h // 2, w // 2)), np.zeros((h // 4, w // 4))
        return cls(quarter.copy(), half.copy(), half.copy(), half.copy(),
                   quarter.copy(), quarter.copy(), quarter.copy(), (h, w))


def _analyze(x):
    a, b = x[0::2, 0::2], x[0::2, 1::2]
    c, d = x[1::2, 0::2], x[1::2, 1::2]
    return ((a + b + c + d) / 2, (a + b - c - d) / 2,
            (a - b + c - d) / 2, (a - b - c + d) / 2)


def _synthesize(ll, h, v, d):
    out = np.empty((2 * ll.shape[0], 2 * ll.shape[1]))
    out[0::2, 0::2] = (ll + h + v + d) / 2
    out[0::2, 1::2] = (ll + h - v - d) / 2
    out[1::2, 0::2] = (ll - h + v - d) / 2
    out[1::2, 1::2] = (ll - h - v + d) / 2
    return out


def dwt2_level2(image) -> WaveletCoeffs2:
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {x.shape}")
    h, w = x.shape
    if h % 4 or w % 4 or h == 0 or w == 0:
        raise ValueError(f"image size {h}x{w} is not a positive multiple of 4")
    ll1, h1, v1, d1 = _analyze(x)
    ll2, h2, v2, d2 = _analyze(ll1)
    return WaveletCoeffs2(ll2, h1, v1, d1, h2, v2, d2, (h, w))


def idwt2_level2(coeffs: WaveletCoeffs2) -> np.ndarray:
    ll1 = _synthesize(coeffs.approx, coeffs.h2, coeffs.v2, coeffs.d2)
    return _synthesize(ll1, coeffs.h1, coeffs.v1, coeffs.d1)
