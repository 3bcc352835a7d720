import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convbci.classifier import train_slda
from convbci.errors import ClassTooSmall, EmptyCounts
from convbci.evaluation import (
    crossval_repeated, save_report, stratified_folds, wilson_chance_threshold,
)
from convbci.features import FeatureMatrix


def test_workload_threshold():
    assert abs(wilson_chance_threshold([200, 200]) - 0.541) <= 0.001


def test_agreement_threshold():
    assert abs(wilson_chance_threshold([86, 85]) - 0.562) <= 0.001


def test_single_class_clamps_to_one():
    assert wilson_chance_threshold([50, 0]) == 1.0


def test_threshold_errors():
    with pytest.raises(EmptyCounts):
        wilson_chance_threshold([])
    with pytest.raises(EmptyCounts):
        wilson_chance_threshold([0, 0])


def test_threshold_closed_form():
    # upper Wilson bound solves (p - p0)^2 = z^2 p (1 - p) / n for p > p0
    n, p0, z = 400, 0.5, 1.6448536269514722
    p = wilson_chance_threshold([200, 200])
    assert (p - p0) ** 2 == pytest.approx(z * z * p * (1 - p) / n, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5000))
def test_threshold_decreases_with_n(m):
    assert wilson_chance_threshold([m + 1, m + 1]) < wilson_chance_threshold([m, m])


def test_threshold_converges_to_p0():
    assert wilson_chance_threshold([10 ** 9, 10 ** 9]) == pytest.approx(0.5, abs=1e-4)
    assert wilson_chance_threshold([3 * 10 ** 9, 10 ** 9]) == pytest.approx(0.625, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 500), min_size=2, max_size=5).filter(lambda c: sum(c) > 0),
       st.randoms())
def test_threshold_permutation_invariant(counts, r):
    perm = list(counts)
    r.shuffle(perm)
    assert wilson_chance_threshold(perm) == pytest.approx(wilson_chance_threshold(counts),
                                                          abs=1e-15)


def test_threshold_matches_proportional_guesser_simulation():
    # a guesser drawing labels with the class frequencies: 95th percentile of its accuracy
    g = np.random.default_rng(0)
    n, sims = 400, 10 ** 6
    acc = g.binomial(n, 0.5, size=sims) / n
    assert abs(np.quantile(acc, 0.95) - wilson_chance_threshold([200, 200])) <= 0.005
    p0 = (86 / 171) ** 2 + (85 / 171) ** 2
    acc = g.binomial(171, p0, size=sims) / 171
    assert abs(np.quantile(acc, 0.95) - wilson_chance_threshold([86, 85])) <= 0.008


# --- folds and CV ----------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(5, 60), st.integers(2, 7), st.integers(0, 10 ** 6))
def test_folds_are_stratified(n0, n1, k, seed):
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    folds = stratified_folds(y, k, np.random.default_rng(seed))
    for f in range(k):
        for c, n_c in ((0, n0), (1, n1)):
            assert abs(np.sum((folds == f) & (y == c)) - n_c / k) < 1
    sizes = np.bincount(folds, minlength=k)
    assert sizes.max() - sizes.min() <= 1


def _clusters(rng, n=100, sep=5.0):
    y = np.arange(n) % 2
    X = rng.standard_normal((n, 2)) + np.where(y[:, None] == 1, sep, -sep) * [1, 0]
    return FeatureMatrix(X, y)


def test_separable_clusters_perfect():
    r = crossval_repeated(_clusters(np.random.default_rng(0)))
    assert r.mean_acc == 1.0 and len(r.fold_accuracies) == 25 and r.significant


def test_shuffled_labels_near_chance():
    fm = _clusters(np.random.default_rng(0))
    shuffled = FeatureMatrix(fm.X, np.random.default_rng(0).permutation(fm.labels))
    r = crossval_repeated(shuffled)
    assert 0.4 <= r.mean_acc <= 0.6


def test_cv_is_deterministic():
    fm = _clusters(np.random.default_rng(1), sep=0.3)
    a, b = crossval_repeated(fm, seed=9), crossval_repeated(fm, seed=9)
    assert a.fold_accuracies == b.fold_accuracies
    assert a == b


def test_cv_refits_inside_folds():
    seen = []

    def train(sub):
        seen.append(sub.n_rows)
        return train_slda(sub)

    crossval_repeated(_clusters(np.random.default_rng(2)), train, k=5, repeats=2)
    assert seen == [80] * 10


def test_cv_report_fields(tmp_path):
    r = crossval_repeated(_clusters(np.random.default_rng(3), n=400, sep=0.1), seed=4)
    assert r.class_counts == [200, 200] and r.n_trials == 400
    assert r.chance_threshold == wilson_chance_threshold([200, 200])
    assert r.significant == (r.mean_acc > r.chance_threshold)
    assert r.sd_acc == pytest.approx(np.std(r.fold_accuracies, ddof=1))
    save_report(r, tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    for key in ("mean_acc", "sd_acc", "chance_threshold", "significant", "fold_accuracies", "seed"):
        assert key in d


def test_cv_needs_k_per_class():
    fm = FeatureMatrix(np.random.default_rng(0).standard_normal((10, 2)), np.r_[[0] * 7, [1] * 3])
    with pytest.raises(ClassTooSmall):
        crossval_repeated(fm)
