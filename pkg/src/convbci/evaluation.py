"""Chance-aware offline evaluation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .classifier import predict_many, train_slda
from .errors import ClassTooSmall, EmptyCounts, InputError, IoFailure

__all__ = [
    "CrossValReport", "wilson_chance_threshold", "stratified_folds",
    "crossval_repeated", "save_report",
]


@dataclass(frozen=True)
class CrossValReport:
    fold_accuracies: list[float]
    mean_acc: float
    sd_acc: float
    n_trials: int
    class_counts: list[int]
    chance_threshold: float
    significant: bool
    seed: int
    folds: int = 5
    repeats: int = 5

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_chance_threshold(class_counts: Sequence[int], alpha: float = 0.05) -> float:
    """Accuracy needed to beat a proportional random guesser.

    A guesser drawing labels with the observed class frequencies is correct
    with probability ``p0 = sum_c (n_c / n)^2``. The threshold is the upper
    end of the one-sided ``1 - alpha`` Wilson score interval around ``p0``
    for ``n`` trials, clamped to 1.

    >>> round(wilson_chance_threshold([200, 200]), 3)
    0.541
    """
    counts = [int(c) for c in class_counts]
    if not counts or sum(counts) < 1:
        raise EmptyCounts("class counts must sum to at least one")
    if any(c < 0 for c in counts):
        raise InputError("class counts must be non-negative")
    if not 0 < alpha < 0.5:
        raise InputError(f"alpha must lie in (0, 0.5), got {alpha}")
    n = sum(counts)
    p0 = sum((c / n) ** 2 for c in counts)
    z = stats.norm.ppf(1.0 - alpha)
    z2 = z * z
    centre = p0 + z2 / (2 * n)
    spread = z * math.sqrt(max(p0 * (1 - p0), 0.0) / n + z2 / (4 * n * n))
    return min((centre + spread) / (1 + z2 / n), 1.0)


def stratified_folds(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per observation.

    Each class is shuffled and dealt round-robin, continuing the deal across
    classes so fold sizes stay within one of each other.
    """
    labels = np.asarray(labels)
    folds = np.empty(labels.size, dtype=int)
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        folds[idx] = (offset + np.arange(idx.size)) % k
        offset += idx.size
    return folds


def _default_predict(model, data):
    return predict_many(model, data.X)


def crossval_repeated(features, train: Callable = train_slda, k: int = 5, repeats: int = 5,
                      seed: int = 0, predict: Callable = _default_predict,
                      alpha: float = 0.05) -> CrossValReport:
    """Repeated stratified k-fold cross-validation.

    Parameters
    ----------
    features
        Any labeled dataset exposing ``labels`` and ``subset(indices)``;
        typically a :class:`~convbci.features.FeatureMatrix`.
    train : callable
        ``train(subset) -> model``. Refit from scratch on every fold.
    predict : callable
        ``predict(model, subset) -> decision values``; positive means class 1.

    Fold assignments for all repeats derive only from ``seed``.
    """
    y = np.asarray(features.labels)
    if y.ndim != 1 or y.size == 0:
        raise InputError("cross-validation needs labels")
    counts = [int(np.sum(y == c)) for c in (0, 1)]
    if min(counts) < k:
        raise ClassTooSmall(f"each class needs >= {k} members, got counts {counts}")
    rng = np.random.default_rng(seed)
    assignments = [stratified_folds(y, k, rng) for _ in range(repeats)]
    accs = []
    for folds in assignments:
        for f in range(k):
            test = np.flatnonzero(folds == f)
            train_idx = np.flatnonzero(folds != f)
            model = train(features.subset(train_idx))
            scores = np.asarray(predict(model, features.subset(test)))
            accs.append(float(np.mean((scores > 0).astype(int) == y[test])))
    mean = float(np.mean(accs))
    sd = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    threshold = wilson_chance_threshold(counts, alpha)
    return CrossValReport(accs, mean, sd, int(y.size), counts, threshold,
                          bool(mean > threshold), int(seed), k, repeats)


def save_report(report: CrossValReport, path) -> None:
    try:
        Path(path).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
