import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.covariance import ledoit_wolf_shrinkage

from convbci.classifier import (
    LinearModel, ledoit_wolf_gamma, load_model, model_from_dict, model_to_dict, pooled_centered,
    predict, predict_many, require_kind, save_model, train_slda,
)
from convbci.errors import (
    DegenerateModel, DimensionMismatch, KindMismatch, MalformedModel, SingleClass,
    SingularCovariance, TooFewObservations,
)
from convbci.features import FeatureMatrix

from oracles import slda_reference


def _two_clusters(rng, n=40, d=5, sep=1.0):
    y = np.arange(n) % 2
    X = rng.standard_normal((n, d)) + sep * y[:, None]
    return FeatureMatrix(X, y)


def _symmetric_pair():
    # each class: four points at distance sqrt(2) on the axes, pooled covariance I
    r = np.sqrt(2.0)
    ring = np.array([[r, 0.0], [-r, 0.0], [0.0, r], [0.0, -r]])
    X = np.vstack([ring + [-1.0, 0.0], ring + [1.0, 0.0]])
    return FeatureMatrix(X, np.array([0] * 4 + [1] * 4))


def test_symmetric_analytic_case():
    fm = _symmetric_pair()
    Xc = pooled_centered(fm)
    np.testing.assert_allclose(Xc.T @ Xc / fm.n_rows, np.eye(2), atol=1e-12)
    m = train_slda(fm, gamma=0.0)
    np.testing.assert_allclose(m.weights, [2.0, 0.0], atol=1e-12)
    w = m.weights / m.weights[0]
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-12)
    assert m.weights[0] > 0 and abs(m.bias) < 1e-12
    assert predict(m, [1.0, 0.0]) > 0
    assert predict(m, [0.0, 0.0]) == pytest.approx(0.0, abs=1e-12)


def test_full_shrinkage_is_scaled_mean_difference(rng):
    fm = _two_clusters(rng)
    m = train_slda(fm, gamma=1.0)
    mu0, mu1 = fm.X[fm.labels == 0].mean(0), fm.X[fm.labels == 1].mean(0)
    Xc = pooled_centered(fm)
    nu = np.trace(Xc.T @ Xc / fm.n_rows) / fm.n_features
    np.testing.assert_allclose(m.weights, (mu1 - mu0) / nu, rtol=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 0.05, 0.5, 1.0, None])
def test_weights_match_elimination_oracle(rng, gamma):
    fm = _two_clusters(rng)
    m = train_slda(fm, gamma=gamma)
    w, b = slda_reference(fm.X, fm.labels, m.shrinkage_gamma)
    np.testing.assert_allclose(m.weights, w, atol=1e-8, rtol=0)
    assert abs(m.bias - b) < 1e-8


def test_prediction_grows_linearly_along_weights(rng):
    m = train_slda(_two_clusters(rng, sep=3.0))
    centre = -m.bias * m.weights / (m.weights @ m.weights)
    u = m.weights / np.linalg.norm(m.weights)
    vals = [predict(m, centre - s * u) for s in (1.0, 2.0, 4.0)]
    assert all(v < 0 for v in vals)
    np.testing.assert_allclose(np.array(vals) / vals[0], [1, 2, 4], rtol=1e-10)


# --- shrinkage -------------------------------------------------------------

def test_gamma_small_for_many_samples(rng):
    fm = FeatureMatrix(rng.standard_normal((10000, 4)) * [1, 2, 3, 4], np.arange(10000) % 2)
    assert ledoit_wolf_gamma(fm) < 0.1


def test_gamma_large_for_few_samples(rng):
    assert ledoit_wolf_gamma(FeatureMatrix(rng.standard_normal((3, 12)))) > 0.5


def test_gamma_at_isotropic_fixed_point():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    fm = FeatureMatrix(X, None)
    assert ledoit_wolf_gamma(fm) == 0.0
    y = FeatureMatrix(np.vstack([X, X + 10]), np.r_[[0] * 4, [1] * 4])
    m0 = train_slda(y, gamma=0.0)
    m1 = train_slda(y, gamma=0.7)
    np.testing.assert_allclose(m0.weights, m1.weights, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(4, 60), st.integers(1, 12), st.booleans())
def test_gamma_matches_reference_implementation(seed, n, d, labeled):
    g = np.random.default_rng(seed)
    X = g.standard_normal((n, d)) * g.uniform(0.1, 3, d)
    fm = FeatureMatrix(X, np.arange(n) % 2 if labeled else None)
    residuals = pooled_centered(fm) if labeled else X
    ref = ledoit_wolf_shrinkage(residuals, assume_centered=True, block_size=10 ** 6)
    assert ledoit_wolf_gamma(fm) == pytest.approx(ref, abs=1e-10)


def test_gamma_needs_two_rows():
    with pytest.raises(TooFewObservations):
        ledoit_wolf_gamma(FeatureMatrix(np.ones((1, 3))))


# --- invariants ------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-50, 50))
def test_translation_covariance(seed, c):
    g = np.random.default_rng(seed)
    fm = _two_clusters(g, 30, 4)
    m = train_slda(fm, gamma=0.2)
    ms = train_slda(FeatureMatrix(fm.X + c, fm.labels), gamma=0.2)
    Z = g.standard_normal((10, 4))
    np.testing.assert_allclose(predict_many(ms, Z + c), predict_many(m, Z), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_class_swap_antisymmetry(seed):
    g = np.random.default_rng(seed)
    fm = _two_clusters(g, 30, 4)
    m = train_slda(fm)
    sw = train_slda(FeatureMatrix(fm.X, 1 - fm.labels))
    assert sw.shrinkage_gamma == m.shrinkage_gamma
    np.testing.assert_array_equal(sw.weights, -m.weights)
    assert sw.bias == -m.bias


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(1e-6, 1.0))
def test_rank_deficient_training_succeeds(seed, gamma):
    g = np.random.default_rng(seed)
    base = g.standard_normal((6, 2))
    X = np.hstack([base, base @ g.standard_normal((2, 6))])      # rank 2 in 8 dims
    fm = FeatureMatrix(X, np.arange(6) % 2)
    m = train_slda(fm, gamma=gamma)
    assert np.all(np.isfinite(m.weights))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-10, 10))
def test_weights_are_linear(seed, a):
    g = np.random.default_rng(seed)
    m = train_slda(_two_clusters(g, 20, 3))
    x, y = g.standard_normal((2, 3))
    w = m.weights
    lhs = w @ (a * x + y)
    assert abs(lhs - (a * (w @ x) + w @ y)) <= 1e-12 * max(1.0, abs(a)) * (1 + np.abs(w).sum())


def test_training_errors(rng):
    with pytest.raises(SingleClass):
        train_slda(FeatureMatrix(rng.standard_normal((5, 2)), np.zeros(5, int)))
    X = np.repeat(rng.standard_normal((1, 3)), 6, axis=0)
    with pytest.raises(DegenerateModel):
        train_slda(FeatureMatrix(X, np.arange(6) % 2), gamma=0.5)
    Xs = np.hstack([rng.standard_normal((20, 2))] * 2)
    Xs[:, 0] += np.arange(20) % 2
    with pytest.raises(SingularCovariance):
        train_slda(FeatureMatrix(Xs, np.arange(20) % 2), gamma=0.0)


def test_predict_dimension_check(rng):
    m = train_slda(_two_clusters(rng))
    with pytest.raises(DimensionMismatch):
        predict(m, np.zeros(4))


def test_require_kind(rng):
    m = train_slda(_two_clusters(rng), kind="agreement")
    require_kind(m, "agreement")
    with pytest.raises(KindMismatch):
        require_kind(m, "workload")


# --- persistence -----------------------------------------------------------

def test_model_roundtrip_identical_predictions(tmp_path, workload_model, rng):
    save_model(workload_model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    Z = rng.standard_normal((100, workload_model.n_features))
    np.testing.assert_array_equal(predict_many(back, Z), predict_many(workload_model, Z))
    np.testing.assert_array_equal(back.weights, workload_model.weights)
    assert back.bias == workload_model.bias
    assert back.feature_meta == workload_model.feature_meta


@pytest.mark.parametrize("drop", ["bias", "weights", "kind", "feature_meta"])
def test_malformed_model(tmp_path, rng, drop):
    d = model_to_dict(train_slda(_two_clusters(rng)))
    del d[drop]
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(MalformedModel):
        load_model(tmp_path / "m.json")


def test_malformed_values(rng):
    d = model_to_dict(train_slda(_two_clusters(rng)))
    for key, bad in (("bias", "x"), ("gamma", "x"), ("gamma", 2.0), ("kind", "other"),
                     ("weights", [])):
        with pytest.raises(MalformedModel):
            model_from_dict({**d, key: bad})


def test_model_is_immutable(rng):
    m = train_slda(_two_clusters(rng))
    assert isinstance(m, LinearModel)
    with pytest.raises(ValueError):
        m.weights[0] = 1.0
