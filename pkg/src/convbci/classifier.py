"""Shrinkage-regularized LDA with a decision boundary at zero."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateModel,
    DimensionMismatch,
    InputError,
    IoFailure,
    KindMismatch,
    MalformedModel,
    MissingFile,
    SingleClass,
    SingularCovariance,
    TooFewObservations,
)
from .features import FeatureMatrix

__all__ = [
    "KINDS", "LinearModel", "ledoit_wolf_gamma", "pooled_centered", "train_slda",
    "predict", "predict_many", "save_model", "load_model", "require_kind",
]

KINDS = ("workload", "agreement")
MODEL_FORMAT = "convbci-linear-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class LinearModel:
    """``predict(x) = weights @ x + bias``; positive means class 1."""

    weights: np.ndarray
    bias: float
    kind: str
    shrinkage_gamma: float
    feature_meta: dict = field(default_factory=dict)
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True).ravel()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "shrinkage_gamma", float(self.shrinkage_gamma))
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.kind not in KINDS:
            raise MalformedModel(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise MalformedModel("weights and bias must be finite")
        if not 0.0 <= self.shrinkage_gamma <= 1.0:
            raise MalformedModel(f"shrinkage gamma {self.shrinkage_gamma} outside [0, 1]")

    @property
    def n_features(self) -> int:
        return self.weights.size


def pooled_centered(features: FeatureMatrix) -> np.ndarray:
    """Rows minus their class mean (or the global mean when unlabeled)."""
    X = features.X
    if features.labels is None:
        return X - X.mean(axis=0)
    Xc = np.empty_like(X)
    for c in (0, 1):
        m = features.labels == c
        if m.any():
            Xc[m] = X[m] - X[m].mean(axis=0)
    return Xc


def ledoit_wolf_gamma(features: FeatureMatrix) -> float:
    """Analytic Ledoit-Wolf shrinkage intensity toward ``nu * I``.

    With centered rows ``x_k``, ``S = X^T X / n`` and ``nu = tr(S) / d``::

        d2 = ||S - nu I||_F^2
        b2 = min(d2, (sum_k ||x_k||^4 - n ||S||_F^2) / n^2)
        gamma = b2 / d2

    Labeled matrices are centered per class, matching the pooled covariance
    used by :func:`train_slda`. Unlabeled rows are taken as residuals that
    are already centered.
    """
    n, d = features.X.shape
    if n < 2:
        raise TooFewObservations(f"need at least 2 observations, got {n}")
    Xc = features.X if features.labels is None else pooled_centered(features)
    S = Xc.T @ Xc / n
    nu = np.trace(S) / d
    d2 = np.sum((S - nu * np.eye(d)) ** 2)
    if d2 <= 0:
        return 0.0
    sq_norms = np.sum(Xc ** 2, axis=1)
    b2_bar = (np.sum(sq_norms ** 2) - n * np.sum(S ** 2)) / n ** 2
    b2 = min(max(b2_bar, 0.0), d2)
    return float(b2 / d2)


def train_slda(features: FeatureMatrix, gamma: float | None = None, kind: str = "workload",
               feature_meta: dict | None = None, channels: Sequence[str] = ()) -> LinearModel:
    """Fit a two-class shrinkage LDA.

    Parameters
    ----------
    features : FeatureMatrix
        Labeled observations (label 1 is the positive class).
    gamma : float, optional
        Shrinkage intensity in [0, 1]; ``None`` picks it with
        :func:`ledoit_wolf_gamma`.

    Notes
    -----
    The pooled class-centered covariance is shrunk to
    ``(1 - gamma) S + gamma nu I``. The bias places the boundary midway
    between the class means; class priors are not folded in.
    """
    y = features.labels
    if y is None:
        raise InputError("training requires labels")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise SingleClass("both classes must be present")
    if gamma is None:
        gamma = ledoit_wolf_gamma(features)
    if not 0.0 <= gamma <= 1.0:
        raise InputError(f"gamma must lie in [0, 1], got {gamma}")
    X = features.X
    n, d = X.shape
    mu0 = X[y == 0].mean(axis=0)
    mu1 = X[y == 1].mean(axis=0)
    if np.array_equal(mu0, mu1):
        raise DegenerateModel("class means coincide")
    Xc = pooled_centered(features)
    S = Xc.T @ Xc / n
    nu = np.trace(S) / d
    reg = (1.0 - gamma) * S + gamma * nu * np.eye(d)
    if not np.all(np.isfinite(reg)):
        raise SingularCovariance("regularized covariance is not finite")
    if gamma > 0:
        # nu I keeps the matrix positive definite; only a failed factorization is fatal
        try:
            np.linalg.cholesky(reg)
        except np.linalg.LinAlgError:
            raise SingularCovariance(f"regularized covariance is singular (gamma={gamma})") from None
    elif np.linalg.cond(reg) > 1e14:
        raise SingularCovariance("unregularized covariance is singular; use gamma > 0")
    w = np.linalg.solve(reg, mu1 - mu0)
    if not np.any(w):
        raise DegenerateModel("class means coincide; weights are all zero")
    bias = -float(w @ (mu0 + mu1)) / 2.0
    return LinearModel(w, bias, kind, gamma, dict(feature_meta or {}), tuple(channels))


def predict_many(model: LinearModel, X) -> np.ndarray:
    """Decision values for each row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"feature dimension {X.shape[-1]} does not match model ({model.n_features})")
    # row-wise products summed per row: no dependence on the number of rows
    return (X * model.weights).sum(axis=1) + model.bias


def predict(model: LinearModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict takes a single feature vector")
    return float(predict_many(model, x[None, :])[0])


def require_kind(model: LinearModel, kind: str) -> None:
    if model.kind != kind:
        raise KindMismatch(f"expected a {kind} model, got {model.kind}")


# --------------------------------------------------------------------------
# persistence

def model_to_dict(model: LinearModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "gamma": model.shrinkage_gamma,
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "channels": list(model.channels),
        "feature_meta": model.feature_meta,
    }


def model_from_dict(obj) -> LinearModel:
    if not isinstance(obj, dict):
        raise MalformedModel("model file must contain a JSON object")
    missing = [k for k in ("kind", "gamma", "weights", "bias", "feature_meta", "channels")
               if k not in obj]
    if missing:
        raise MalformedModel(f"model lacks {', '.join(missing)}")
    weights, bias = obj["weights"], obj["bias"]
    if (not isinstance(weights, list) or not weights
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in weights)):
        raise MalformedModel("'weights' must be a non-empty list of numbers")
    if isinstance(bias, bool) or not isinstance(bias, (int, float)):
        raise MalformedModel("'bias' must be a number")
    gamma = obj["gamma"]
    if isinstance(gamma, bool) or not isinstance(gamma, (int, float)):
        raise MalformedModel("'gamma' must be a number")
    if not isinstance(obj["feature_meta"], dict) or not isinstance(obj["channels"], list):
        raise MalformedModel("'feature_meta' must be an object and 'channels' a list")
    return LinearModel(np.asarray(weights, dtype=np.float64), bias, obj["kind"],
                       obj["gamma"], obj["feature_meta"], tuple(obj["channels"]))


def save_model(model: LinearModel, path) -> None:
    """Write ``model`` as JSON. Floats use shortest round-trip repr, so a
    reload reproduces every number exactly."""
    try:
        Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n",
                              encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path) -> LinearModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(f"missing model file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"model file is not valid JSON: {exc.msg}") from None
    return model_from_dict(obj)
