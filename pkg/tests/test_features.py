import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convbci.dsp import Epoch
from convbci.errors import (
    DegenerateEpoch, EpochTooShort, MalformedAngle, NotPositiveDefinite, SingleClass,
    TooManyFilters,
)
from convbci.features import (
    LOGVAR_FLOOR, THETA, SpatialFilterBank, WindowSpec, apply_csp_logvar, bank_from_meta,
    bank_to_meta, class_covariances, label_grid_jumps, train_csp, windowed_means,
)
from convbci.session import EventRecord

from oracles import generalized_eigenvalues, null_vector, random_spd


def _ep(x, label=None, rate=100.0):
    return Epoch(0.0, np.asarray(x, dtype=np.float64), rate, label)


def _bank(W):
    W = np.asarray(W, dtype=np.float64)
    return SpatialFilterBank((THETA,), (W,), (np.zeros(W.shape[1]),), max(1, W.shape[1] // 2))


def check_csp_against_oracle(C0, C1, k, tol=1e-8):
    """Return max eigenvalue and filter discrepancies against the brute-force oracle."""
    W, lam = train_csp(C0, C1, k)
    B = C0 + C1
    ref = generalized_eigenvalues(C1, B)[::-1]
    d = C0.shape[0]
    keep = np.r_[0:k, d - k:d]
    err_lam = float(np.max(np.abs(lam - ref[keep])))
    err_vec = 0.0
    for j, i in enumerate(keep):
        v = null_vector(C1, B, ref[i])
        w = W[:, j]
        s = np.sign(w @ B @ v)
        err_vec = max(err_vec, float(np.max(np.abs(w - s * v))))
    return err_lam, err_vec


def test_csp_axis_aligned_case():
    C1 = np.diag([4.0, 1.0]) / 5
    C0 = np.diag([1.0, 4.0]) / 5
    W, lam = train_csp(C0, C1, k=1)
    np.testing.assert_allclose(lam, [0.8, 0.2], atol=1e-12)
    assert abs(W[1, 0]) < 1e-12 and abs(W[0, 1]) < 1e-12


def test_csp_equal_classes():
    C = random_spd(np.random.default_rng(0), 5)
    _, lam = train_csp(C, C, k=2)
    np.testing.assert_allclose(lam, 0.5, atol=1e-12)


def test_csp_random_4x4_matches_oracle():
    g = np.random.default_rng(7)
    err_lam, err_vec = check_csp_against_oracle(random_spd(g, 4), random_spd(g, 4), 2)
    assert err_lam < 1e-8 and err_vec < 1e-8


def test_csp_filters_whiten_composite():
    g = np.random.default_rng(3)
    C0, C1 = random_spd(g, 6), random_spd(g, 6)
    W, lam = train_csp(C0, C1, 3)
    np.testing.assert_allclose(W.T @ (C0 + C1) @ W, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(W.T @ C1 @ W, np.diag(lam), atol=1e-10)
    assert np.all(np.diff(lam) <= 0)


def test_csp_swap_gives_complement():
    g = np.random.default_rng(11)
    C0, C1 = random_spd(g, 5), random_spd(g, 5)
    _, lam = train_csp(C0, C1, 2)
    _, lam_sw = train_csp(C1, C0, 2)
    np.testing.assert_allclose(np.sort(1 - lam), np.sort(lam_sw), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(1e-3, 1e3))
def test_csp_scale_invariance(seed, c):
    g = np.random.default_rng(seed)
    C0, C1 = random_spd(g, 4), random_spd(g, 4)
    W, lam = train_csp(C0, C1, 2)
    Ws, lams = train_csp(c * C0, c * C1, 2)
    np.testing.assert_allclose(lam, lams, atol=1e-9)
    for j in range(4):
        cos = abs(W[:, j] @ Ws[:, j]) / (np.linalg.norm(W[:, j]) * np.linalg.norm(Ws[:, j]))
        assert cos > 1 - 1e-8


def test_csp_rank_deficiency():
    g = np.random.default_rng(5)
    A = g.standard_normal((4, 4))
    A -= A.mean(axis=0)          # rows sum to zero like average-referenced data
    C0 = A @ A.T + 1e-3 * np.eye(4)
    C0 -= C0.mean(axis=0) + C0.mean(axis=1)[:, None] - C0.mean()
    C1 = random_spd(g, 4)
    C1 -= C1.mean(axis=0) + C1.mean(axis=1)[:, None] - C1.mean()
    with pytest.raises(NotPositiveDefinite):
        train_csp(C0, C1, 1)
    W, lam = train_csp(C0, C1, 1, allow_rank_deficient=True)
    assert W.shape == (4, 2)
    np.testing.assert_allclose(W.sum(axis=0), 0, atol=1e-8)
    with pytest.raises(TooManyFilters):
        train_csp(C0, C1, 2, allow_rank_deficient=True)


def test_csp_too_many_filters():
    with pytest.raises(TooManyFilters):
        train_csp(np.eye(3), np.eye(3), 2)


# --- class covariances -----------------------------------------------------

def test_class_covariances_single_channel_mass(rng):
    x0 = np.zeros((3, 500))
    x0[0] = rng.standard_normal(500)
    x1 = np.zeros((3, 500))
    x1[2] = rng.standard_normal(500)
    C0, C1 = class_covariances([_ep(x0, 0), _ep(x1, 1)])
    assert C0[0, 0] > 0.9 and C1[2, 2] > 0.9
    assert np.trace(C0) == pytest.approx(1.0)


def test_class_covariances_identical(rng):
    x = rng.standard_normal((4, 200))
    C0, C1 = class_covariances([_ep(x, 0), _ep(x, 1)])
    np.testing.assert_array_equal(C0, C1)


def test_class_covariances_errors(rng):
    with pytest.raises(DegenerateEpoch):
        class_covariances([_ep(np.ones((2, 100)), 0), _ep(rng.standard_normal((2, 100)), 1)])
    with pytest.raises(SingleClass):
        class_covariances([_ep(rng.standard_normal((2, 100)), 0)])


# --- log-variance ----------------------------------------------------------

def test_logvar_unit_variance(rng):
    x = rng.standard_normal((2, 100000))
    x = (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)
    f = apply_csp_logvar([_ep(x)], _bank(np.eye(2)))
    np.testing.assert_allclose(f, 0.0, atol=1e-9)


def test_logvar_sine():
    a = 3.0
    t = np.arange(1000) / 100.0
    x = np.vstack([a * np.sin(2 * np.pi * 5 * t), np.zeros_like(t)])
    f = apply_csp_logvar([_ep(x)], _bank(np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert abs(f[0] - np.log(a * a / 2)) <= 0.02 * abs(np.log(a * a / 2))


def test_logvar_zero_epoch_is_floor():
    f = apply_csp_logvar([_ep(np.zeros((2, 100)))], _bank(np.eye(2)))
    np.testing.assert_array_equal(f, np.log(LOGVAR_FLOOR))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_logvar_sign_flip_invariance(seed):
    g = np.random.default_rng(seed)
    x = g.standard_normal((4, 100))
    bank = _bank(g.standard_normal((4, 2)))
    np.testing.assert_array_equal(apply_csp_logvar([_ep(x)], bank),
                                  apply_csp_logvar([_ep(-x)], bank))


def test_bank_meta_roundtrip():
    g = np.random.default_rng(2)
    bank = _bank(g.standard_normal((5, 4)))
    back = bank_from_meta(bank_to_meta(bank))
    np.testing.assert_array_equal(back.filters[0], bank.filters[0])
    assert back.bands == bank.bands and back.k == bank.k


# --- windowed means --------------------------------------------------------

def test_windowed_means_constant():
    f = windowed_means(_ep(np.ones((3, 65))))
    np.testing.assert_array_equal(f, 1.0)
    assert f.size == 27


def test_windowed_means_ramp():
    f = windowed_means(_ep(np.arange(65.0)[None]))
    assert f[0] == 22.0
    np.testing.assert_array_equal(f, 22.0 + 5 * np.arange(9))


def test_window_layout():
    spec = WindowSpec()
    assert (spec.n_windows, spec.width_frames) == (9, 5)
    assert (spec.start_frame, spec.end_frame) == (20, 65)
    with pytest.raises(EpochTooShort):
        windowed_means(_ep(np.ones((1, 64))))


def test_windowed_means_channel_major():
    x = np.vstack([np.zeros(65), np.ones(65)])
    f = windowed_means(_ep(x))
    np.testing.assert_array_equal(f, [0.0] * 9 + [1.0] * 9)


@settings(max_examples=25, deadline=None)
@given(st.floats(-100, 100), st.integers(0, 10 ** 6))
def test_windowed_means_linear(a, seed):
    g = np.random.default_rng(seed)
    x, y = g.standard_normal((2, 3, 70))
    lhs = windowed_means(_ep(a * x + y))
    rhs = a * windowed_means(_ep(x)) + windowed_means(_ep(y))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * max(1, abs(a)))


# --- grid-jump labels ------------------------------------------------------

def test_grid_labels():
    ev = [EventRecord(i, "jump", {"angle_deg": a}) for i, a in
          enumerate(["30", "120", "60", "45", "90", "0", "180", "44.999", "90.001"])]
    got = [(e.meta["angle_deg"], c) for e, c in label_grid_jumps(ev)]
    assert got == [("30", 1), ("120", 0), ("0", 1), ("180", 0), ("44.999", 1), ("90.001", 0)]


@pytest.mark.parametrize("bad", ["north", "nan", "-5", "181"])
def test_grid_labels_malformed(bad):
    with pytest.raises(MalformedAngle):
        label_grid_jumps([EventRecord(0, "jump", {"angle_deg": bad})])
