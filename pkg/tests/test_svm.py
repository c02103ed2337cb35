import json

import numpy as np
import pytest

from mspad.svm import (ConvergenceError, LinearSVM, SvmModel, class_box_bounds, decision_score,
                       dual_objective, kkt_violation, smo_solve, train)

from oracles import svm_dual_bruteforce


def embed(points):
    X = np.zeros((len(points), 256))
    X[:, :np.shape(points)[1]] = points
    return X


def toy_problem(seed):
    rng = np.random.default_rng(seed)
    return embed(rng.normal(size=(4, 2))), np.array([1, 1, -1, -1])


def gram(model, X):
    Z = (X - model.feature_mean) / model.feature_std
    return Z @ Z.T


def test_symmetric_pair():
    X = embed([[1.0], [-1.0]])
    m = train(X, [1, -1], C=1.0)
    assert m.decision_score(X[0]) > 0 > m.decision_score(X[1])
    assert m.b == pytest.approx(0.0, abs=1e-12)
    assert decision_score(m, m.feature_mean) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("C", [0.1, 1.0, 10.0])
def test_dual_matches_bruteforce(seed, C):
    X, y = toy_problem(seed)
    m = train(X, y, C=C, seed=seed)
    K, Cb = gram(m, X), class_box_bounds(y, C)
    best, _ = svm_dual_bruteforce(K, y, Cb)
    got = dual_objective(m.dual.alpha, K, y)
    assert abs(got - best) <= 1e-6 * abs(best)
    assert kkt_violation(m.dual.alpha, K, y, Cb) < 1e-3
    assert np.all(m.dual.alpha >= 0) and np.all(m.dual.alpha <= Cb)
    assert abs(m.dual.alpha @ y) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_label_negation_is_exact(seed):
    X, y = toy_problem(seed)
    a, b = train(X, y, C=1.0, seed=seed), train(X, -y, C=1.0, seed=seed)
    np.testing.assert_array_equal(b.w, -a.w)
    assert b.b == -a.b
    np.testing.assert_array_equal(b.decision_scores(X), -a.decision_scores(X))


def test_free_support_vector_sits_on_margin():
    rng = np.random.default_rng(2)
    X = embed(np.r_[rng.normal(1.5, 1, (20, 3)), rng.normal(-1.5, 1, (20, 3))])
    y = np.r_[np.ones(20), -np.ones(20)]
    m = train(X, y, C=1.0)
    Cb = class_box_bounds(y, 1.0)
    free = (m.dual.alpha > 1e-9) & (m.dual.alpha < Cb - 1e-9)
    assert free.any()
    margins = y[free] * m.decision_scores(X[free])
    np.testing.assert_allclose(margins, 1.0, atol=2e-3)


def test_score_at_feature_mean_is_bias():
    rng = np.random.default_rng(5)
    X = rng.random((30, 256))
    y = np.where(X[:, 0] > 0.5, 1, -1)
    m = train(X, y)
    assert m.decision_score(m.feature_mean) == pytest.approx(m.b, abs=1e-12)


def test_agrees_with_nearest_centroid():
    rng = np.random.default_rng(11)
    mu = rng.normal(size=256)
    def draw(n):
        y = np.where(rng.random(n) < 0.5, 1, -1)
        return y[:, None] * 0.15 * mu + rng.normal(size=(n, 256)), y
    Xtr, ytr = draw(200)
    Xte, _ = draw(300)
    m = train(Xtr, ytr)
    c_pos, c_neg = Xtr[ytr > 0].mean(0), Xtr[ytr < 0].mean(0)
    oracle = np.where(np.linalg.norm(Xte - c_pos, axis=1) < np.linalg.norm(Xte - c_neg, axis=1), 1, -1)
    pred = np.where(m.decision_scores(Xte) >= 0, 1, -1)
    assert np.mean(pred == oracle) >= 0.95


def test_deterministic_to_the_bit():
    rng = np.random.default_rng(8)
    X = rng.random((40, 256))
    y = np.where(rng.random(40) < 0.3, 1, -1)
    y[:2] = [1, -1]
    assert train(X, y, seed=4).dumps() == train(X, y, seed=4).dumps()


def test_affine_feature_rescaling_has_no_effect():
    rng = np.random.default_rng(9)
    X = rng.random((30, 256))
    y = np.where(X[:, 3] + 0.2 * rng.random(30) > 0.6, 1, -1)
    a = train(X, y)
    b = train(3.0 * X + 7.0, y)
    np.testing.assert_allclose(b.decision_scores(3.0 * X + 7.0), a.decision_scores(X), atol=1e-6)


def test_json_roundtrip():
    X, y = toy_problem(0)
    m = train(X, y)
    back = SvmModel.from_json(json.loads(m.dumps()))
    assert set(m.to_json()) == {"w", "b", "c", "mean", "std"}
    np.testing.assert_array_equal(back.decision_scores(X), m.decision_scores(X))


@pytest.mark.parametrize("y,C", [([1, 1, 1, 1], 1.0), ([1, 1, -1, -1], 0.0), ([1, 1, -1, 2], 1.0)])
def test_training_errors(y, C):
    X, _ = toy_problem(0)
    with pytest.raises(ValueError):
        train(X, y, C=C)


def test_identical_inputs_are_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        train(np.ones((4, 256)), [1, 1, -1, -1])


def test_wrong_feature_length():
    X, y = toy_problem(0)
    with pytest.raises(ValueError):
        train(X, y).decision_score(np.zeros(255))


def test_iteration_cap():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 256))
    y = np.where(rng.random(30) < 0.5, 1, -1)
    Z = (X - X.mean(0)) / X.std(0)
    with pytest.raises(ConvergenceError):
        smo_solve(Z @ Z.T, y, 10.0, max_iter=1)


def test_balanced_box_bounds():
    y = np.array([1, -1, -1, -1])
    np.testing.assert_array_equal(class_box_bounds(y, 2.0), [6.0, 2.0, 2.0, 2.0])
    np.testing.assert_array_equal(class_box_bounds(y, 2.0, balance=False), [2.0] * 4)


def test_estimator_wrapper():
    X, y = toy_problem(3)
    est = LinearSVM(C=1.0).fit(X, y)
    np.testing.assert_array_equal(est.decision_function(X), train(X, y).decision_scores(X))
    assert set(est.predict(X)) <= {-1, 1}
    assert est.get_params()["C"] == 1.0
