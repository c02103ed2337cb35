"""Soft-margin linear SVM trained with SMO.

The dual

    min_a  1/2 a'Qa - sum(a),   Q_ij = y_i y_j <x_i, x_j>
    s.t.   0 <= a_i <= C_i,     sum(y_i a_i) = 0

is solved with maximal-violating-pair working-set selection. Features are
standardized with training statistics before anything else happens, and
bonafide samples (+1) get ``C * n_attack / n_bonafide`` as box bound so the
minority class is not swamped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_features, check_labels

STD_FLOOR = 1e-8
TAU = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SmoResult:
    alpha: np.ndarray
    rho: float
    n_iter: int
    violation: float


def smo_solve(K, y, C, tol=1e-3, max_iter=10**6, seed=0) -> SmoResult:
    """Solve the SVM dual for Gram matrix ``K``, labels ``y`` and box bounds ``C``.

    ``C`` is a scalar or one bound per sample. The decision function of the
    solution is ``sum_t alpha_t y_t K(x_t, x) - rho``. Ties in the working-set
    selection go to the earliest index of a seeded permutation.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    Cv = np.broadcast_to(np.asarray(C, dtype=np.float64), (n,)).copy()
    if np.any(Cv <= 0):
        raise ValueError("box bounds must be positive")

    perm = np.random.default_rng(seed).permutation(n)
    Kp = K[np.ix_(perm, perm)]
    yp, Cp = y[perm], Cv[perm]
    pos = yp > 0
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(Kp).copy()

    n_iter, violation = 0, np.inf
    while True:
        below = alpha < Cp
        above = alpha > 0
        up = np.where(pos, below, above)
        low = np.where(pos, above, below)
        score = -yp * grad
        if not up.any() or not low.any():
            violation = 0.0
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        violation = score[i] - score[j]
        if violation < tol:
            break
        if n_iter >= max_iter:
            raise ConvergenceError(
                f"SMO did not reach KKT tolerance {tol} in {max_iter} iterations "
                f"(violation {violation:.3g})")
        curv = max(diag[i] + diag[j] - 2.0 * Kp[i, j], TAU)
        room_i = Cp[i] - alpha[i] if pos[i] else alpha[i]
        room_j = alpha[j] if pos[j] else Cp[j] - alpha[j]
        step = min(violation / curv, room_i, room_j)
        # land exactly on the box when a bound is what limits the step
        if step == room_i:
            alpha[i] = Cp[i] if pos[i] else 0.0
        else:
            alpha[i] += yp[i] * step
        if step == room_j:
            alpha[j] = 0.0 if pos[j] else Cp[j]
        else:
            alpha[j] -= yp[j] * step
        grad += step * yp * (Kp[:, i] - Kp[:, j])
        n_iter += 1

    rho = _compute_rho(alpha, yp, grad, Cp)
    out = np.empty(n)
    out[perm] = alpha
    return SmoResult(out, rho, n_iter, float(violation))


def _compute_rho(alpha, y, grad, C):
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.mean(yg[free]))
    at_upper = alpha >= C
    pos = y > 0
    # bounds on rho implied by the KKT conditions of bounded variables
    lb_mask = np.where(pos, at_upper, ~at_upper)
    ub_mask = np.where(pos, ~at_upper, at_upper)
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    if np.isfinite(lb) and np.isfinite(ub):
        return float((lb + ub) / 2)
    return float(lb if np.isfinite(lb) else ub)


def dual_objective(alpha, K, y) -> float:
    """Dual objective in maximization form: sum(a) - 1/2 a'Qa."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(K) @ ay)


def kkt_violation(alpha, K, y, C) -> float:
    """Largest pairwise KKT violation (m - M); <= 0 means exactly optimal."""
    alpha, y = np.asarray(alpha, float), np.asarray(y, float)
    C = np.broadcast_to(np.asarray(C, float), alpha.shape)
    grad = y * (np.asarray(K) @ (alpha * y)) - 1.0
    pos = y > 0
    up = np.where(pos, alpha < C, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < C)
    if not up.any() or not low.any():
        return 0.0
    score = -y * grad
    return float(score[up].max() - score[low].min())


def class_box_bounds(y, C, balance=True) -> np.ndarray:
    y = np.asarray(y)
    if not balance:
        return np.full(len(y), float(C))
    n_pos, n_neg = np.sum(y > 0), np.sum(y < 0)
    return np.where(y > 0, C * (n_neg / n_pos), float(C))


@dataclass(frozen=True, eq=False)
class SvmModel:
    w: np.ndarray
    b: float
    C: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    dual: SmoResult | None = field(default=None, repr=False)

    def standardize(self, X) -> np.ndarray:
        return (check_features(X, len(self.w)) - self.feature_mean) / self.feature_std

    def decision_scores(self, X) -> np.ndarray:
        return self.standardize(X) @ self.w + self.b

    def decision_score(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != len(self.w):
            raise ValueError(f"expected a feature vector of length {len(self.w)}, got shape {x.shape}")
        return float(self.decision_scores(x[None, :])[0])

    def to_json(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "c": self.C,
                "mean": self.feature_mean.tolist(), "std": self.feature_std.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "SvmModel":
        return cls(np.asarray(obj["w"], float), float(obj["b"]), float(obj["c"]),
                   np.asarray(obj["mean"], float), np.asarray(obj["std"], float))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def train(features, labels, C=1.0, seed=0, tol=1e-3, max_iter=10**6,
          balance_classes=True) -> SvmModel:
    """Fit a linear SVM; labels are +1 (bonafide) / -1 (attack)."""
    X = check_features(features)
    y = check_labels(labels, len(X))
    if not C > 0:
        raise ValueError(f"C must be positive, got {C!r}")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both bonafide (+1) and attack (-1) samples")
    if np.all(X == X[0]):
        raise ValueError("degenerate training data: every feature vector is identical")

    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    Z = (X - mean) / std
    K = Z @ Z.T
    res = smo_solve(K, y, class_box_bounds(y, C, balance_classes), tol, max_iter, seed)
    w = (res.alpha * y) @ Z
    return SvmModel(w, -res.rho, float(C), mean, std, res)


def decision_score(model: SvmModel, x) -> float:
    return model.decision_score(x)


class LinearSVM(ClassifierMixin, BaseEstimator):
    """sklearn-compatible wrapper around :func:`train`.

    Labels must be +1 / -1; ``decision_function`` is higher for bonafide.
    """

    def __init__(self, C=1.0, seed=0, tol=1e-3, max_iter=10**6, balance_classes=True):
        self.C = C
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.balance_classes = balance_classes

    def fit(self, X, y):
        self.model_ = train(X, y, self.C, self.seed, self.tol, self.max_iter, self.balance_classes)
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = len(self.model_.w)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_scores(X)

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)
