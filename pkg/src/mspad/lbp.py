"""3x3 local binary patterns, histogrammed into 256 bins.

Neighbours are visited clockwise starting at the top-left pixel, which
carries the most significant bit::

    7 6 5
    0 . 4
    1 2 3

A bit is set when the neighbour is >= the centre. Border pixels are not
coded, so an H x W image contributes (H-2)(W-2) codes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

N_BINS = 256

# (row offset, col offset) for bits 7..0
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp_codes(image) -> np.ndarray:
    """Per-pixel LBP codes of the interior, shape (H-2, W-2), dtype uint8."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {x.shape}")
    h, w = x.shape
    if h < 3 or w < 3:
        raise ValueError(f"LBP needs at least a 3x3 image, got {h}x{w}")
    centre = x[1:-1, 1:-1]
    codes = np.zeros(centre.shape, dtype=np.uint8)
    for bit, (dr, dc) in zip(range(7, -1, -1), NEIGHBOURS):
        nb = x[1 + dr:h - 1 + dr, 1 + dc:w - 1 + dc]
        codes |= (nb >= centre).astype(np.uint8) << bit
    return codes


def lbp_histogram(image, normalize: bool = True) -> np.ndarray:
    """256-bin LBP histogram; L1-normalized unless ``normalize`` is False."""
    codes = lbp_codes(image)
    hist = np.bincount(codes.ravel(), minlength=N_BINS).astype(np.float64)
    if normalize:
        hist /= codes.size
    return hist


def lbp_histograms(images) -> np.ndarray:
    """Histograms for a stack of images with shape (..., H, W) -> (..., 256)."""
    x = np.asarray(images, dtype=np.float64)
    lead = x.shape[:-2]
    flat = x.reshape((-1,) + x.shape[-2:])
    out = np.stack([lbp_histogram(im) for im in flat]) if len(flat) else np.zeros((0, N_BINS))
    return out.reshape(lead + (N_BINS,))


class LBPHistogram(TransformerMixin, BaseEstimator):
    """Map a stack of grayscale images (n, H, W) to LBP histograms (n, 256)."""

    def __init__(self, normalize=True):
        self.normalize = normalize

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 3:
            raise ValueError(f"expected images of shape (n, H, W), got {x.shape}")
        return np.stack([lbp_histogram(im, self.normalize) for im in x]) if len(x) \
            else np.zeros((0, N_BINS))
