"""Feature extraction for the two decoders.

Workload uses filter-bank CSP: per frequency band, spatial filters from a
generalized eigenproblem on class covariances, then log-variance of the
projected signal. Agreement uses windowed means of the ERP: per channel, the
average amplitude in consecutive fixed-width post-onset windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dsp import BandSpec, Epoch, round_half_up
from .errors import (
    DegenerateEpoch,
    DimensionMismatch,
    EpochTooShort,
    InputError,
    MalformedAngle,
    NonFiniteFeature,
    NotPositiveDefinite,
    SingleClass,
    TooManyFilters,
)
from .session import EventRecord

__all__ = [
    "THETA", "ALPHA", "ERP_BAND", "LOGVAR_FLOOR", "DEFAULT_K",
    "SpatialFilterBank", "WindowSpec", "FeatureMatrix",
    "class_covariances", "train_csp", "fit_filter_bank", "apply_csp_logvar",
    "logvar_features", "project", "bank_to_meta", "bank_from_meta", "windowed_means", "window_means_array", "label_grid_jumps",
]

THETA = BandSpec(4.0, 7.0)
ALPHA = BandSpec(8.0, 13.0)
ERP_BAND = BandSpec(0.1, 15.0)
LOGVAR_FLOOR = 1e-12
DEFAULT_K = 3
RANK_TOL = 1e-10

CORRECT_MAX_DEG = 45.0
INCORRECT_MIN_DEG = 90.0


@dataclass(frozen=True)
class FeatureMatrix:
    X: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise InputError(f"feature matrix must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NonFiniteFeature("feature matrix contains non-finite entries")
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            y = np.asarray(self.labels).astype(int)
            if y.shape != (X.shape[0],):
                raise InputError("labels must have one entry per row")
            if not np.all((y == 0) | (y == 1)):
                raise InputError("labels must be 0 or 1")
            object.__setattr__(self, "labels", y)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(self.X[idx], None if self.labels is None else self.labels[idx])


# --------------------------------------------------------------------------
# CSP

@dataclass(frozen=True, eq=False)
class SpatialFilterBank:
    """Per-band CSP projections.

    ``filters[b]`` is channels x 2k; columns are ordered by descending
    eigenvalue, so the first k favour class 1 and the last k class 0.
    """

    bands: tuple[BandSpec, ...]
    filters: tuple[np.ndarray, ...]
    eigenvalues: tuple[np.ndarray, ...]
    k: int

    def __post_init__(self):
        if len(self.bands) != len(self.filters) or len(self.bands) != len(self.eigenvalues):
            raise InputError("bands, filters and eigenvalues must align")
        object.__setattr__(self, "bands", tuple(self.bands))
        object.__setattr__(self, "filters", tuple(np.asarray(f, dtype=np.float64)
                                                  for f in self.filters))
        object.__setattr__(self, "eigenvalues", tuple(np.asarray(e, dtype=np.float64)
                                                      for e in self.eigenvalues))

    @property
    def n_channels(self) -> int:
        return self.filters[0].shape[0]

    @property
    def n_features(self) -> int:
        return sum(f.shape[1] for f in self.filters)


def _epoch_covariance(x: np.ndarray) -> np.ndarray:
    if x.shape[-1] < 2:
        raise DegenerateEpoch("epoch needs at least two frames")
    xc = x - x.mean(axis=-1, keepdims=True)
    c = xc @ xc.T / (x.shape[-1] - 1)
    tr = np.trace(c)
    if not tr > 0:
        raise DegenerateEpoch("epoch covariance has zero trace")
    return c / tr


def class_covariances(epochs: Sequence[Epoch]) -> tuple[np.ndarray, np.ndarray]:
    """Average trace-normalized covariance of each class.

    Returns
    -------
    C0, C1 : ndarray
        Symmetric PSD channel x channel matrices, each with unit trace.
    """
    sums = {0: None, 1: None}
    counts = {0: 0, 1: 0}
    for ep in epochs:
        if ep.label not in (0, 1):
            raise InputError("every epoch needs a 0/1 label")
        c = _epoch_covariance(np.asarray(ep.samples, dtype=np.float64))
        sums[ep.label] = c if sums[ep.label] is None else sums[ep.label] + c
        counts[ep.label] += 1
    if not counts[0] or not counts[1]:
        raise SingleClass("both classes must be present")
    C = [sums[c] / counts[c] for c in (0, 1)]
    return tuple((m + m.T) / 2 for m in C)


def train_csp(C0: np.ndarray, C1: np.ndarray, k: int = DEFAULT_K,
              allow_rank_deficient: bool = False):
    """Solve ``C1 w = lam (C0 + C1) w`` and keep the k largest and k smallest.

    The composite covariance is whitened, ``P = U diag(s)^-1/2``, and the
    whitened class-1 covariance is diagonalized symmetrically. Columns are
    normalized so that ``W.T @ (C0 + C1) @ W`` is the identity.

    With ``allow_rank_deficient`` the problem is solved on the range of
    ``C0 + C1`` (eigenvalues above ``RANK_TOL`` times the largest), which is
    what average-referenced data needs: the common-mode direction is null.

    Returns
    -------
    filters : ndarray, shape (channels, 2k)
    eigenvalues : ndarray, shape (2k,), descending
    """
    C0 = np.asarray(C0, dtype=np.float64)
    C1 = np.asarray(C1, dtype=np.float64)
    if C0.shape != C1.shape or C0.ndim != 2 or C0.shape[0] != C0.shape[1]:
        raise DimensionMismatch("covariances must be square and of equal shape")
    n = C0.shape[0]
    if k < 1 or 2 * k > n:
        raise TooManyFilters(f"2k = {2 * k} filters requested for {n} channels")
    composite = (C0 + C1 + (C0 + C1).T) / 2
    s, U = np.linalg.eigh(composite)
    if not np.all(np.isfinite(s)) or s.max() <= 0:
        raise NotPositiveDefinite("C0 + C1 is not positive definite")
    keep_dims = s > RANK_TOL * s.max()
    if not keep_dims.all():
        if not allow_rank_deficient:
            raise NotPositiveDefinite("C0 + C1 is not positive definite")
        s, U = s[keep_dims], U[:, keep_dims]
    r = s.size
    if 2 * k > r:
        raise TooManyFilters(f"2k = {2 * k} filters requested for rank {r}")
    P = U / np.sqrt(s)
    M = P.T @ C1 @ P
    lam, V = np.linalg.eigh((M + M.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    keep = np.r_[0:k, r - k:r]
    return P @ V[:, keep], lam[keep]


def fit_filter_bank(band_epochs: Sequence[Sequence[Epoch]], bands: Sequence[BandSpec],
                    k: int = DEFAULT_K, allow_rank_deficient: bool = True) -> SpatialFilterBank:
    """Train one CSP per band; ``band_epochs[b]`` holds the band-passed epochs."""
    filters, eigs = [], []
    for epochs in band_epochs:
        W, lam = train_csp(*class_covariances(epochs), k=k,
                           allow_rank_deficient=allow_rank_deficient)
        filters.append(W)
        eigs.append(lam)
    return SpatialFilterBank(tuple(bands), tuple(filters), tuple(eigs), k)


def project(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply spatial filters: (..., channels, frames) -> (..., filters, frames).

    Accumulates channel by channel so every output frame depends only on the
    input frame at the same index, with a fixed summation order.
    """
    out = W[0][:, None] * x[..., 0:1, :]
    for c in range(1, W.shape[0]):
        out = out + W[c][:, None] * x[..., c:c + 1, :]
    return out


def _logvar(projected: np.ndarray) -> np.ndarray:
    # explicit two-pass variance: identical arithmetic offline and online
    m = projected.mean(axis=-1, keepdims=True)
    v = ((projected - m) ** 2).mean(axis=-1)
    return np.log(v + LOGVAR_FLOOR)


def logvar_features(band_arrays: Sequence[np.ndarray], bank: SpatialFilterBank) -> np.ndarray:
    """Vectorized CSP log-variance.

    ``band_arrays[b]`` has shape (..., channels, frames); the result has shape
    (..., n_features) with bands concatenated in bank order.
    """
    if len(band_arrays) != len(bank.bands):
        raise DimensionMismatch(f"{len(band_arrays)} band signals for {len(bank.bands)} bands")
    feats = []
    for x, W in zip(band_arrays, bank.filters):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-2] != W.shape[0]:
            raise DimensionMismatch(f"{x.shape[-2]} channels, filters expect {W.shape[0]}")
        feats.append(_logvar(project(W, x)))
    out = np.concatenate(feats, axis=-1)
    if not np.all(np.isfinite(out)):
        raise NonFiniteFeature("log-variance feature is not finite")
    return out


def apply_csp_logvar(band_epochs: Sequence[Epoch], bank: SpatialFilterBank) -> np.ndarray:
    """Log-variance features of one epoch.

    ``band_epochs`` holds the same epoch band-passed once per bank band, in
    bank order. Feature ``j`` of band ``b`` is ``log(var(w_j^T x_b) + 1e-12)``.
    """
    return logvar_features([ep.samples for ep in band_epochs], bank)


def bank_to_meta(bank: SpatialFilterBank) -> dict:
    return {
        "bands": [b.as_list() for b in bank.bands],
        "k": bank.k,
        "filters": [f.tolist() for f in bank.filters],
        "eigenvalues": [e.tolist() for e in bank.eigenvalues],
    }


def bank_from_meta(meta: dict) -> SpatialFilterBank:
    return SpatialFilterBank(
        tuple(BandSpec(float(lo), float(hi)) for lo, hi in meta["bands"]),
        tuple(np.asarray(f, dtype=np.float64) for f in meta["filters"]),
        tuple(np.asarray(e, dtype=np.float64) for e in meta["eigenvalues"]),
        int(meta["k"]),
    )


# --------------------------------------------------------------------------
# windowed means

@dataclass(frozen=True)
class WindowSpec:
    start_s: float = 0.200
    end_s: float = 0.650
    width_s: float = 0.050
    rate_hz: float = 100.0

    def __post_init__(self):
        n = (self.end_s - self.start_s) / self.width_s
        w = self.width_s * self.rate_hz
        if n < 1 or abs(n - round(n)) > 1e-9 or w < 1 or abs(w - round(w)) > 1e-9:
            raise InputError(f"window layout {self} does not tile into whole frames")

    @property
    def n_windows(self) -> int:
        return round((self.end_s - self.start_s) / self.width_s)

    @property
    def width_frames(self) -> int:
        return round(self.width_s * self.rate_hz)

    @property
    def start_frame(self) -> int:
        return round_half_up(self.start_s * self.rate_hz)

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.n_windows * self.width_frames

    def to_dict(self) -> dict:
        return {"start_s": self.start_s, "end_s": self.end_s,
                "width_s": self.width_s, "rate_hz": self.rate_hz}

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        return cls(float(d["start_s"]), float(d["end_s"]), float(d["width_s"]),
                   float(d["rate_hz"]))


def window_means_array(x: np.ndarray, spec: WindowSpec) -> np.ndarray:
    """Windowed means over the last axis; shape (..., ch, frames) -> (..., ch * n_windows)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < spec.end_frame:
        raise EpochTooShort(f"epoch has {x.shape[-1]} frames, windows need {spec.end_frame}")
    seg = x[..., spec.start_frame:spec.end_frame]
    seg = seg.reshape(x.shape[:-1] + (spec.n_windows, spec.width_frames))
    means = seg.mean(axis=-1)
    return means.reshape(x.shape[:-2] + (-1,))


def windowed_means(epoch: Epoch, spec: WindowSpec = WindowSpec()) -> np.ndarray:
    """Per-channel mean of each post-onset window, channel-major."""
    if abs(epoch.rate_hz - spec.rate_hz) > 1e-9:
        raise InputError(f"epoch rate {epoch.rate_hz} Hz differs from window rate {spec.rate_hz} Hz")
    return window_means_array(epoch.samples, spec)


# --------------------------------------------------------------------------
# labels

def label_grid_jumps(events: Sequence[EventRecord]) -> list[tuple[EventRecord, int]]:
    """Label cursor jumps by angular deviation from the target direction.

    Below 45 degrees is "correct" (1), above 90 degrees "incorrect" (0);
    anything in between, boundaries included, is dropped.
    """
    out = []
    for i, ev in enumerate(events):
        raw = ev.meta.get("angle_deg")
        try:
            angle = float(raw)
        except (TypeError, ValueError):
            raise MalformedAngle(f"event {i}: angle_deg {raw!r} is not a number") from None
        if not (math.isfinite(angle) and 0.0 <= angle <= 180.0):
            raise MalformedAngle(f"event {i}: angle_deg {angle} outside [0, 180]")
        if angle < CORRECT_MAX_DEG:
            out.append((ev, 1))
        elif angle > INCORRECT_MIN_DEG:
            out.append((ev, 0))
    return out
