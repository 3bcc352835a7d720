"""End-to-end calibration chains for the workload and agreement decoders.

Offline chain shared by both: downsample to 250 Hz, average reference,
(optionally) drop epochs touching the worst artifact windows, resample to the
100 Hz feature rate. Workload then band-passes theta and alpha, tiles each
condition phase into 1 s epochs and fits filter-bank CSP + shrinkage LDA.
Agreement band-passes 0.1-15 Hz, labels grid jumps by angle and takes
windowed means of the 0-650 ms epoch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import dsp
from .classifier import LinearModel, predict_many, train_slda
from .dsp import BandSpec, Epoch
from .errors import InputError
from .evaluation import CrossValReport, crossval_repeated
from .features import (
    ALPHA, DEFAULT_K, ERP_BAND, THETA, FeatureMatrix, WindowSpec, bank_from_meta,
    bank_to_meta, fit_filter_bank, label_grid_jumps, logvar_features, window_means_array,
)
from .session import EventRecord, Session, SessionData

log = logging.getLogger(__name__)

__all__ = [
    "PREPROCESS_RATE_HZ", "FEATURE_RATE_HZ", "WORKLOAD_BANDS", "EPOCH_S", "ERP_WINDOW",
    "WorkloadEpochs", "preprocess", "workload_epoch_events", "workload_epochs",
    "fit_workload", "predict_workload", "agreement_features", "calibrate", "cross_validate",
]

PREPROCESS_RATE_HZ = 250.0
FEATURE_RATE_HZ = 100.0
WORKLOAD_BANDS = (THETA, ALPHA)
EPOCH_S = 1.0
ERP_WINDOW = WindowSpec()
ERP_EPOCH = (0.0, 0.650)
HIGHPASS_HZ = 1.0


def preprocess(data: SessionData, reject_fraction: float = 0.0,
               reject_window_s: float = 1.0) -> tuple[SessionData, dsp.RejectionMask | None]:
    """Downsample to 250 Hz and average-reference.

    When ``reject_fraction > 0`` the artifact mask is computed on a 1 Hz
    high-passed copy; the returned signal itself is not high-passed.
    """
    x = data
    if x.rate > PREPROCESS_RATE_HZ:
        x = dsp.resample(x, PREPROCESS_RATE_HZ)
    x = dsp.average_reference(x)
    mask = None
    if reject_fraction > 0:
        mask = dsp.reject_artifact_windows(dsp.highpass(x, HIGHPASS_HZ), reject_window_s,
                                           reject_fraction)
        log.info("artifact rejection: %d of %d windows", len(mask.rejected), mask.n_windows)
    return x, mask


def _features_rate(x: SessionData) -> SessionData:
    return dsp.resample(x, FEATURE_RATE_HZ)


# --------------------------------------------------------------------------
# workload

_CONDITION_CLASS = {"high": 1, "low": 0}


def workload_epoch_events(events: Sequence[EventRecord],
                          epoch_s: float = EPOCH_S) -> list[tuple[EventRecord, int]]:
    """Tile every condition phase into back-to-back epochs.

    Phase events carry ``meta["condition"]`` in {high, low} and
    ``meta["duration_s"]``; others are ignored.
    """
    out = []
    for ev in events:
        cond = ev.meta.get("condition")
        if cond is None:
            continue
        if cond not in _CONDITION_CLASS:
            raise InputError(f"unknown workload condition {cond!r} at {ev.t_s} s")
        try:
            duration = float(ev.meta.get("duration_s", "10"))
        except ValueError:
            raise InputError(f"bad duration_s on event at {ev.t_s} s") from None
        n = int(np.floor(duration / epoch_s + 1e-9))
        out.extend((EventRecord(ev.t_s + i * epoch_s, "epoch", {"condition": cond}),
                    _CONDITION_CLASS[cond]) for i in range(n))
    return out


@dataclass(frozen=True, eq=False)
class WorkloadEpochs:
    """Band-passed epochs, shape (bands, epochs, channels, frames), plus labels."""

    signals: np.ndarray
    labels: np.ndarray
    onsets: np.ndarray
    bands: tuple[BandSpec, ...]
    channels: tuple[str, ...]

    def subset(self, idx) -> "WorkloadEpochs":
        idx = np.asarray(idx)
        return WorkloadEpochs(self.signals[:, idx], self.labels[idx], self.onsets[idx],
                              self.bands, self.channels)

    def __len__(self):
        return self.labels.size


def workload_epochs(session: Session, reject_fraction: float = 0.0,
                    bands: Sequence[BandSpec] = WORKLOAD_BANDS) -> WorkloadEpochs:
    labeled = workload_epoch_events(session.events)
    if not labeled:
        raise InputError("session has no workload condition events")
    x, mask = preprocess(session.data, reject_fraction)
    if mask is not None:
        labeled = [(e, c) for e, c in labeled if not mask.overlaps(e.t_s, e.t_s + EPOCH_S)]
    x = _features_rate(x)
    events = [e for e, _ in labeled]
    signals = []
    for band in bands:
        epochs = dsp.extract_epochs(dsp.bandpass(x, band), events, (0.0, EPOCH_S))
        signals.append(np.stack([ep.samples for ep in epochs]))
    return WorkloadEpochs(np.stack(signals), np.array([c for _, c in labeled]),
                          np.array([e.t_s for e in events]), tuple(bands),
                          session.header.channels)


def _workload_meta(bank) -> dict:
    meta = {"pipeline": "fbcsp_logvar", "feature_rate_hz": FEATURE_RATE_HZ,
            "window_s": EPOCH_S, "preprocess_rate_hz": PREPROCESS_RATE_HZ}
    meta.update(bank_to_meta(bank))
    return meta


def fit_workload(epochs: WorkloadEpochs, k: int = DEFAULT_K,
                 gamma: float | None = None) -> LinearModel:
    band_epochs = [[Epoch(t, s, FEATURE_RATE_HZ, int(c))
                    for t, s, c in zip(epochs.onsets, sig, epochs.labels)]
                   for sig in epochs.signals]
    bank = fit_filter_bank(band_epochs, epochs.bands, k)
    fm = FeatureMatrix(logvar_features(list(epochs.signals), bank), epochs.labels)
    return train_slda(fm, gamma, "workload", _workload_meta(bank), epochs.channels)


def predict_workload(model: LinearModel, epochs: WorkloadEpochs) -> np.ndarray:
    bank = bank_from_meta(model.feature_meta)
    return predict_many(model, logvar_features(list(epochs.signals), bank))


# --------------------------------------------------------------------------
# agreement

def agreement_features(session: Session, reject_fraction: float = 0.0
                       ) -> tuple[FeatureMatrix, np.ndarray]:
    """Windowed-means features of labeled grid jumps and their onsets."""
    jumps = [e for e in session.events if "angle_deg" in e.meta]
    labeled = label_grid_jumps(jumps)
    if not labeled:
        raise InputError("session has no labeled grid-jump events")
    x, mask = preprocess(session.data, reject_fraction)
    if mask is not None:
        labeled = [(e, c) for e, c in labeled
                   if not mask.overlaps(e.t_s + ERP_EPOCH[0], e.t_s + ERP_EPOCH[1])]
    x = dsp.bandpass(_features_rate(x), ERP_BAND)
    epochs = dsp.extract_epochs(x, [e for e, _ in labeled], ERP_EPOCH)
    X = window_means_array(np.stack([ep.samples for ep in epochs]), ERP_WINDOW)
    return FeatureMatrix(X, np.array([c for _, c in labeled])), np.array([e.t_s for e, _ in labeled])


def _agreement_meta() -> dict:
    return {"pipeline": "windowed_means", "feature_rate_hz": FEATURE_RATE_HZ,
            "window_s": ERP_EPOCH[1], "preprocess_rate_hz": PREPROCESS_RATE_HZ,
            "band": ERP_BAND.as_list(), "windows": ERP_WINDOW.to_dict()}


# --------------------------------------------------------------------------
# entry points

def calibrate(session: Session, kind: str, k: int = DEFAULT_K, gamma: float | None = None,
              reject_fraction: float = 0.0) -> tuple[LinearModel, dict]:
    """Fit a decoder of ``kind`` on a calibration session.

    Returns the model and a summary with feature dimension, shrinkage and
    class counts.
    """
    if kind == "workload":
        ep = workload_epochs(session, reject_fraction)
        model = fit_workload(ep, k, gamma)
        labels = ep.labels
    elif kind == "agreement":
        fm, _ = agreement_features(session, reject_fraction)
        model = train_slda(fm, gamma, "agreement", _agreement_meta(), session.header.channels)
        labels = fm.labels
    else:
        raise InputError(f"unknown kind {kind!r}")
    summary = {"kind": kind, "n_features": model.n_features, "gamma": model.shrinkage_gamma,
               "class_counts": [int(np.sum(labels == 0)), int(np.sum(labels == 1))],
               "channels": list(model.channels)}
    return model, summary


def cross_validate(session: Session, kind: str, folds: int = 5, repeats: int = 5,
                   seed: int = 0, k: int = DEFAULT_K, gamma: float | None = None,
                   shuffle_labels: bool = False, reject_fraction: float = 0.0) -> CrossValReport:
    """Repeated stratified CV of the full decoder (CSP refit inside folds).

    ``shuffle_labels`` permutes the labels with ``seed`` first, giving a
    chance-level control run.
    """
    rng = np.random.default_rng(seed)
    if kind == "workload":
        data = workload_epochs(session, reject_fraction)
        if shuffle_labels:
            data = WorkloadEpochs(data.signals, rng.permutation(data.labels), data.onsets,
                                  data.bands, data.channels)
        return crossval_repeated(data, lambda d: fit_workload(d, k, gamma), folds, repeats,
                                 seed, predict=predict_workload)
    if kind == "agreement":
        fm, _ = agreement_features(session, reject_fraction)
        if shuffle_labels:
            fm = FeatureMatrix(fm.X, rng.permutation(fm.labels))
        return crossval_repeated(fm, lambda d: train_slda(d, gamma, "agreement"), folds,
                                 repeats, seed)
    raise InputError(f"unknown kind {kind!r}")
