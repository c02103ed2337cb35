"""The two PAD systems: per-band score fusion and wavelet image fusion.

Both are sklearn-style classifiers over spectral cubes ``(n, 9, H, W)`` with
labels +1 (bonafide) / -1 (attack). ``decision_function`` is higher for
bonafide; ``predict`` thresholds it at ``threshold_`` (0 until a threshold is
frozen with :meth:`set_threshold`).

LBP features do not depend on the training split, so the protocol computes
them once and drives the ``*_features`` methods directly.
"""
from __future__ import annotations

import json

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .data import N_BANDS, SpectralCube
from .fusion import FusionWeights, fuse_bands
from .lbp import N_BINS, lbp_histogram, lbp_histograms
from .svm import SvmModel, train
from .validation import check_cubes, check_labels


def band_features(X) -> np.ndarray:
    """Per-band LBP histograms, shape (n, 9, 256)."""
    return lbp_histograms(check_cubes(X))


def fused_features(X, weights=None) -> np.ndarray:
    """LBP histograms of the fused images, shape (n, 256)."""
    weights = FusionWeights.coerce(weights)
    cubes = check_cubes(X)
    if not len(cubes):
        return np.zeros((0, N_BINS))
    return np.stack([lbp_histogram(fuse_bands(c, weights)) for c in cubes])


class _PADBase(ClassifierMixin, BaseEstimator):
    threshold_ = 0.0

    def set_threshold(self, threshold: float):
        self.threshold_ = float(threshold)
        return self

    def predict(self, X):
        return np.where(self.decision_function(X) >= self.threshold_, 1, -1)

    def _mark_fitted(self):
        self.classes_ = np.array([-1, 1])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"


class ScoreFusionPAD(_PADBase):
    """One linear SVM per band on its LBP histogram; band scores are summed.

    With ``normalize_scores`` each band score is min-max scaled using the
    ranges recorded by :meth:`calibrate` before the sum.
    """

    method = "score_fusion"

    def __init__(self, C=1.0, seed=0, tol=1e-3, max_iter=10**6, normalize_scores=False):
        self.C = C
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.normalize_scores = normalize_scores

    def fit(self, X, y):
        return self.fit_features(band_features(X), y)

    def fit_features(self, F, y):
        F = np.asarray(F, dtype=np.float64)
        if F.ndim != 3 or F.shape[1:] != (N_BANDS, N_BINS):
            raise ValueError(f"expected band features of shape (n, 9, 256), got {F.shape}")
        y = check_labels(y, len(F))
        models = []
        for k in range(N_BANDS):
            try:
                models.append(train(F[:, k], y, self.C, self.seed, self.tol, self.max_iter))
            except Exception as exc:
                raise type(exc)(f"band {k}: {exc}") from exc
        self.models_ = models
        self.score_min_ = np.zeros(N_BANDS)
        self.score_max_ = np.ones(N_BANDS)
        self._mark_fitted()
        return self

    def band_scores_features(self, F) -> np.ndarray:
        check_is_fitted(self, "models_")
        F = np.asarray(F, dtype=np.float64)
        return np.stack([m.decision_scores(F[:, k]) for k, m in enumerate(self.models_)], axis=1)

    def band_scores(self, X) -> np.ndarray:
        """Raw per-band decision scores, shape (n, 9)."""
        return self.band_scores_features(band_features(X))

    def fuse_scores(self, band_scores) -> np.ndarray:
        """Sum rule over the band axis, accumulated in band order."""
        s = np.asarray(band_scores, dtype=np.float64)
        if self.normalize_scores:
            span = self.score_max_ - self.score_min_
            s = (s - self.score_min_) / np.where(span > 0, span, 1.0)
        total = np.zeros(s.shape[0])
        for k in range(s.shape[1]):
            total = total + s[:, k]
        return total

    def decision_function_features(self, F) -> np.ndarray:
        return self.fuse_scores(self.band_scores_features(F))

    def decision_function(self, X):
        return self.decision_function_features(band_features(X))

    def calibrate_features(self, F):
        """Record per-band score ranges on a development set (for ``normalize_scores``)."""
        s = self.band_scores_features(F)
        self.score_min_, self.score_max_ = s.min(axis=0), s.max(axis=0)
        return self

    def calibrate(self, X):
        return self.calibrate_features(band_features(X))

    def to_json(self) -> dict:
        check_is_fitted(self, "models_")
        return {"method": self.method, "params": self.get_params(),
                "models": [m.to_json() for m in self.models_],
                "threshold": self.threshold_,
                "score_min": self.score_min_.tolist(), "score_max": self.score_max_.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ScoreFusionPAD":
        est = cls(**obj["params"])
        est.models_ = [SvmModel.from_json(m) for m in obj["models"]]
        if len(est.models_) != N_BANDS:
            raise ValueError(f"score-fusion pipeline needs 9 models, got {len(est.models_)}")
        est.score_min_ = np.asarray(obj["score_min"], float)
        est.score_max_ = np.asarray(obj["score_max"], float)
        est.threshold_ = float(obj["threshold"])
        est._mark_fitted()
        return est


class ImageFusionPAD(_PADBase):
    """Wavelet-fuse the bands, take the LBP histogram, score with one SVM."""

    method = "image_fusion"

    def __init__(self, weights=None, C=1.0, seed=0, tol=1e-3, max_iter=10**6):
        self.weights = weights
        self.C = C
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter

    def features(self, X) -> np.ndarray:
        return fused_features(X, self.weights)

    def fit(self, X, y):
        return self.fit_features(self.features(X), y)

    def fit_features(self, F, y):
        self.weights_ = FusionWeights.coerce(self.weights)
        self.model_ = train(F, y, self.C, self.seed, self.tol, self.max_iter)
        self._mark_fitted()
        return self

    def decision_function_features(self, F) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.decision_scores(F)

    def decision_function(self, X):
        return self.decision_function_features(self.features(X))

    def to_json(self) -> dict:
        check_is_fitted(self, "model_")
        params = self.get_params()
        params["weights"] = self.weights_.tolist()
        return {"method": self.method, "params": params, "models": [self.model_.to_json()],
                "weights": self.weights_.tolist(), "threshold": self.threshold_}

    @classmethod
    def from_json(cls, obj: dict) -> "ImageFusionPAD":
        est = cls(**obj["params"])
        est.weights_ = FusionWeights(obj["weights"])
        if len(obj["models"]) != 1:
            raise ValueError("image-fusion pipeline needs exactly one model")
        est.model_ = SvmModel.from_json(obj["models"][0])
        est.threshold_ = float(obj["threshold"])
        est._mark_fitted()
        return est


METHODS = {ScoreFusionPAD.method: ScoreFusionPAD, ImageFusionPAD.method: ImageFusionPAD}


def make_pipeline(method: str, **params):
    try:
        return METHODS[method](**params)
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}") from None


def load_pipeline(obj: dict | str):
    if isinstance(obj, str):
        obj = json.loads(obj)
    return METHODS[obj["method"]].from_json(obj)


def _split_pairs(pairs):
    cubes = [c for c, _ in pairs]
    labels = [l for _, l in pairs]
    return cubes, labels


def train_score_fusion(train_set, C=1.0, seed=0) -> ScoreFusionPAD:
    """Fit on a list of ``(SpectralCube, label)`` pairs."""
    return ScoreFusionPAD(C=C, seed=seed).fit(*_split_pairs(train_set))


def score_score_fusion(p: ScoreFusionPAD, cube: SpectralCube) -> float:
    return float(p.decision_function([cube])[0])


def train_image_fusion(train_set, weights=None, C=1.0, seed=0) -> ImageFusionPAD:
    return ImageFusionPAD(weights=weights, C=C, seed=seed).fit(*_split_pairs(train_set))


def score_image_fusion(p: ImageFusionPAD, cube: SpectralCube) -> float:
    return float(p.decision_function([cube])[0])
