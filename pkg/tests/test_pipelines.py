import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline as sk_pipeline

from mspad.data import SpectralCube, load_all
from mspad.fusion import FusionWeights, WaveletFusion, fuse_cube
from mspad.lbp import LBPHistogram, lbp_histogram
from mspad.pipelines import (ImageFusionPAD, ScoreFusionPAD, band_features, fused_features,
                             load_pipeline, make_pipeline, score_image_fusion, score_score_fusion,
                             train_image_fusion, train_score_fusion)
from mspad.svm import LinearSVM, train


@pytest.fixture(scope="module")
def data(small_dataset):
    cubes = load_all(small_dataset)
    y = np.array([r.species.label for r in small_dataset.records])
    return cubes, y


def band0_separable(rng, n=12, size=8):
    """Band 0 is a checkerboard for bonafide and noise for attacks; other bands are noise."""
    X = rng.integers(0, 65536, size=(2 * n, 9, size, size)).astype(np.uint16)
    board = (np.indices((size, size)).sum(0) % 2) * 40000 + 10000
    X[:n, 0] = board + rng.integers(0, 100, size=(n, size, size))
    return X, np.r_[np.ones(n, int), -np.ones(n, int)]


def distinct_cube(rng, size=8):
    band = rng.permutation(size * size).reshape(size, size).astype(np.uint16) * 1000
    return SpectralCube(np.stack([band] * 9))


def test_band0_separable_trains_perfectly(rng):
    X, y = band0_separable(rng)
    est = ScoreFusionPAD().fit(X, y)
    s0 = est.band_scores(X)[:, 0]
    assert np.all(np.sign(s0) == y)


def test_identical_cubes_fail_with_band_context(rng):
    cube = rng.integers(0, 65536, size=(9, 8, 8)).astype(np.uint16)
    X = np.stack([cube] * 4)
    with pytest.raises(ValueError, match="band 0: degenerate"):
        ScoreFusionPAD().fit(X, [1, 1, -1, -1])
    with pytest.raises(ValueError, match="degenerate"):
        ImageFusionPAD().fit(X, [1, 1, -1, -1])


def test_score_fusion_is_deterministic(data):
    cubes, y = data
    assert ScoreFusionPAD(seed=3).fit(cubes, y).dumps() == ScoreFusionPAD(seed=3).fit(cubes, y).dumps()


def test_image_fusion_is_deterministic(data):
    cubes, y = data
    assert ImageFusionPAD(seed=3).fit(cubes, y).dumps() == ImageFusionPAD(seed=3).fit(cubes, y).dumps()


def test_sum_rule_decomposition(data):
    cubes, y = data
    est = ScoreFusionPAD().fit(cubes, y)
    F = band_features(cubes[:10])
    oracle = [sum(m.decision_score(F[i, k]) for k, m in enumerate(est.models_)) for i in range(10)]
    np.testing.assert_allclose(est.decision_function(cubes[:10]), oracle, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(est.decision_function(cubes[:10]),
                                  est.fuse_scores(est.band_scores(cubes[:10])))


def test_fuse_scores_examples():
    est = ScoreFusionPAD()
    assert est.fuse_scores(np.full((1, 9), 0.25)).tolist() == [2.25]
    assert est.fuse_scores(np.r_[9.0, np.zeros(8)][None]).tolist() == [9.0]


def test_sum_rule_monotonicity(rng):
    est = ScoreFusionPAD()
    s = rng.normal(size=(5, 9))
    for k in range(9):
        bumped = s.copy()
        bumped[:, k] += 0.5
        np.testing.assert_allclose(est.fuse_scores(bumped) - est.fuse_scores(s), 0.5, atol=1e-12)


def test_normalized_scores_use_calibration_ranges(data):
    cubes, y = data
    est = ScoreFusionPAD(normalize_scores=True).fit(cubes, y).calibrate(cubes)
    raw = est.band_scores(cubes)
    want = ((raw - raw.min(0)) / (raw.max(0) - raw.min(0))).sum(1)
    np.testing.assert_allclose(est.decision_function(cubes), want, atol=1e-12)
    assert est.decision_function(cubes).max() <= 9 + 1e-12


def test_image_fusion_composition_oracle(data):
    cubes, y = data
    est = ImageFusionPAD().fit(cubes, y)
    chain = np.stack([lbp_histogram(fuse_cube(SpectralCube(c))) for c in cubes])
    np.testing.assert_array_equal(est.features(cubes), chain)
    assert est.model_.dumps() == train(chain, y).dumps()
    c = SpectralCube(cubes[0])
    assert score_image_fusion(est, c) == est.model_.decision_score(chain[0])


def test_identical_band_cubes_match_single_band_pipeline(rng):
    cubes = [distinct_cube(rng) for _ in range(8)]
    y = np.r_[np.ones(4, int), -np.ones(4, int)]
    F = fused_features(cubes)
    single = np.stack([lbp_histogram(c.as_float()[0]) for c in cubes])
    np.testing.assert_allclose(F, single, atol=1e-9)
    est = ImageFusionPAD().fit(cubes, y)
    np.testing.assert_allclose(est.decision_function(cubes), train(single, y).decision_scores(single),
                               atol=1e-9)


def test_constant_cube_score(data):
    cubes, y = data
    est = ImageFusionPAD().fit(cubes, y)
    e255 = np.zeros(256)
    e255[255] = 1.0
    m = est.model_
    want = m.b + m.w @ ((e255 - m.feature_mean) / m.feature_std)
    cube = SpectralCube(np.full((9, 16, 16), 30000, np.uint16))
    assert score_image_fusion(est, cube) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("method", ["score_fusion", "image_fusion"])
def test_serialization_roundtrip(data, method):
    cubes, y = data
    est = make_pipeline(method, C=0.5, seed=2).fit(cubes, y).set_threshold(0.125)
    back = load_pipeline(est.dumps())
    assert type(back) is type(est) and back.threshold_ == 0.125
    np.testing.assert_array_equal(back.decision_function(cubes), est.decision_function(cubes))
    assert back.dumps() == est.dumps()


def test_unknown_method():
    with pytest.raises(ValueError, match="unknown method"):
        make_pipeline("early_fusion")


def test_sklearn_protocol(data):
    cubes, y = data
    est = ScoreFusionPAD(C=2.0)
    assert clone(est).get_params() == est.get_params()
    fitted = est.fit(cubes, y)
    assert set(fitted.predict(cubes)) <= {-1, 1}
    assert 0.5 <= fitted.score(cubes, y) <= 1.0


def test_sklearn_pipeline_equivalence(data):
    cubes, y = data
    w = FusionWeights(np.r_[0.2, 0.2, np.full(7, 0.6 / 7)])
    chain = sk_pipeline(WaveletFusion(w), LBPHistogram(), LinearSVM()).fit(cubes, y)
    est = ImageFusionPAD(weights=w).fit(cubes, y)
    np.testing.assert_array_equal(chain.decision_function(cubes), est.decision_function(cubes))


def test_functional_wrappers(data):
    cubes, y = data
    pairs = [(SpectralCube(c), l) for c, l in zip(cubes, y)]
    sf, imf = train_score_fusion(pairs), train_image_fusion(pairs)
    assert score_score_fusion(sf, pairs[0][0]) == ScoreFusionPAD().fit(cubes, y).decision_function(cubes[:1])[0]
    assert score_image_fusion(imf, pairs[0][0]) == ImageFusionPAD().fit(cubes, y).decision_function(cubes[:1])[0]


def test_feature_shape_checks():
    with pytest.raises(ValueError):
        ScoreFusionPAD().fit_features(np.zeros((4, 8, 256)), [1, 1, -1, -1])
