"""Continuous-signal preprocessing.

Filters are 4th-order Butterworth designs realized as second-order sections.
``zero_phase`` mode runs the filter forward then backward (offline use);
``causal`` mode runs it forward only (online replay).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import (
    CutoffAboveNyquist,
    InputError,
    InvalidFraction,
    RatioNotRational,
    SingleChannel,
    TooShort,
    UnstableFilter,
    UpsampleRequested,
    WindowOutOfBounds,
)
from .session import EventRecord, SessionData

__all__ = [
    "BandSpec", "Epoch", "RejectionMask", "FILTER_ORDER", "ANTIALIAS_FRACTION",
    "resample", "average_reference", "highpass", "lowpass", "bandpass",
    "design_sos", "apply_sos", "extract_epochs", "epoch_slice",
    "reject_artifact_windows", "round_half_up",
]

FILTER_ORDER = 4
# anti-alias cutoff as a fraction of the target Nyquist frequency
ANTIALIAS_FRACTION = 0.45
MODES = ("zero_phase", "causal")


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class BandSpec:
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not (0 < self.lo_hz < self.hi_hz):
            raise InputError(f"band needs 0 < lo < hi, got ({self.lo_hz}, {self.hi_hz})")

    def as_list(self) -> list[float]:
        return [self.lo_hz, self.hi_hz]


@dataclass(frozen=True, eq=False)
class Epoch:
    onset_s: float
    samples: np.ndarray
    rate_hz: float
    label: int | None = None

    @property
    def n_frames(self) -> int:
        return self.samples.shape[-1]


@dataclass(frozen=True)
class RejectionMask:
    """Indices of rejected non-overlapping windows.

    Window ``i`` covers ``[start_time_s + i * window_len_s, start_time_s + (i + 1) * window_len_s)``.
    """

    window_len_s: float
    rejected: tuple[int, ...]
    fraction: float
    n_windows: int
    start_time_s: float = 0.0

    def overlaps(self, t_start: float, t_end: float) -> bool:
        """True if ``[t_start, t_end)`` intersects any rejected window."""
        for i in self.rejected:
            w0 = self.start_time_s + i * self.window_len_s
            if t_start < w0 + self.window_len_s and w0 < t_end:
                return True
        return False


# --------------------------------------------------------------------------
# filter design

def design_sos(kind: str, freqs, fs: float, order: int = FILTER_ORDER) -> np.ndarray:
    """Butterworth second-order sections for ``kind`` in {lowpass, highpass, bandpass}.

    Raises :class:`CutoffAboveNyquist` for cutoffs at or above ``fs / 2``, and
    :class:`UnstableFilter` if the design fails an impulse test.
    """
    nyq = fs / 2.0
    f = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(f >= nyq):
        raise CutoffAboveNyquist(f"cutoff {f.max()} Hz not below Nyquist {nyq} Hz")
    if np.any(f <= 0):
        raise InputError("cutoff frequencies must be positive")
    btype = {"lowpass": "lowpass", "highpass": "highpass", "bandpass": "bandpass"}[kind]
    wn = f[0] if f.size == 1 else f
    sos = signal.butter(order, wn, btype=btype, fs=fs, output="sos")
    impulse = np.zeros(4096)
    impulse[0] = 1.0
    response = signal.sosfilt(sos, impulse)
    if not np.all(np.isfinite(response)) or not np.all(np.isfinite(sos)):
        raise UnstableFilter(f"{kind} design {freqs} at {fs} Hz is not finite")
    return sos


def apply_sos(sos: np.ndarray, x: np.ndarray, mode: str = "zero_phase") -> np.ndarray:
    """Filter the last axis of ``x``."""
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if mode == "causal":
        return signal.sosfilt(sos, x, axis=-1)
    return signal.sosfiltfilt(sos, x, axis=-1)


def _filtered(x: SessionData, kind, freqs, mode) -> SessionData:
    sos = design_sos(kind, freqs, x.rate)
    return x.replace(apply_sos(sos, x.samples, mode))


def highpass(x: SessionData, cutoff_hz: float, mode: str = "zero_phase") -> SessionData:
    return _filtered(x, "highpass", cutoff_hz, mode)


def lowpass(x: SessionData, cutoff_hz: float, mode: str = "zero_phase") -> SessionData:
    return _filtered(x, "lowpass", cutoff_hz, mode)


def bandpass(x: SessionData, band: BandSpec, mode: str = "zero_phase") -> SessionData:
    return _filtered(x, "bandpass", band.as_list(), mode)


# --------------------------------------------------------------------------
# resampling and referencing

def rational_ratio(source_hz: float, target_hz: float) -> tuple[int, int]:
    """Return ``(up, down)`` with ``target / source == up / down``."""
    ratio = target_hz / source_hz
    frac = Fraction(ratio).limit_denominator(1000)
    if abs(float(frac) - ratio) > 1e-9 * ratio:
        raise RatioNotRational(f"{source_hz} -> {target_hz} Hz is not a small rational ratio")
    return frac.numerator, frac.denominator


def resample_array(x: np.ndarray, source_hz: float, target_hz: float,
                   mode: str = "zero_phase") -> np.ndarray:
    """Downsample the last axis of ``x`` by a rational factor.

    Zero-stuffs by ``up``, low-passes at ``ANTIALIAS_FRACTION`` of the target
    Nyquist, then keeps every ``down``-th frame. Output frame ``j`` sits at
    time ``j / target_hz`` relative to input frame 0.
    """
    if target_hz > source_hz:
        raise UpsampleRequested(f"cannot upsample {source_hz} -> {target_hz} Hz")
    x = np.asarray(x, dtype=np.float64)
    if target_hz == source_hz:
        return x.copy()
    up, down = rational_ratio(source_hz, target_hz)
    if up > 1:
        stuffed = np.zeros(x.shape[:-1] + (x.shape[-1] * up,))
        stuffed[..., ::up] = x * up
    else:
        stuffed = x
    sos = design_sos("lowpass", ANTIALIAS_FRACTION * target_hz / 2.0, source_hz * up)
    return apply_sos(sos, stuffed, mode)[..., ::down]


def resample(x: SessionData, target_hz: float, mode: str = "zero_phase") -> SessionData:
    """Downsample a recording to ``target_hz``.

    Resampling to the current rate returns an identical copy.
    """
    if target_hz == x.rate:
        return x.replace(x.samples)
    return x.replace(resample_array(x.samples, x.rate, target_hz, mode), target_hz)


def average_reference(x: SessionData) -> SessionData:
    if x.header.n_channels < 2:
        raise SingleChannel("average reference needs at least two channels")
    s = np.asarray(x.samples, dtype=np.float64)
    return x.replace(s - s.mean(axis=0, keepdims=True))


# --------------------------------------------------------------------------
# epoching

def epoch_slice(onset_s: float, window: tuple[float, float], rate_hz: float,
                start_time_s: float = 0.0) -> tuple[int, int]:
    """Frame range ``[first, first + n)`` for an event window.

    Frames follow the half-open convention ``[onset + start, onset + end)``
    with round-half-up on both the first frame and the frame count.
    """
    start_off, end_off = window
    first = round_half_up((onset_s - start_time_s + start_off) * rate_hz)
    n = round_half_up((end_off - start_off) * rate_hz)
    return first, n


def extract_epochs(x: SessionData, events: Sequence[EventRecord], window: tuple[float, float],
                   labels: Sequence[int | None] | None = None) -> list[Epoch]:
    """Cut one fixed-length epoch per event.

    Raises
    ------
    WindowOutOfBounds
        If an event's window extends beyond the recording; ``.index`` holds
        the offending event's position.
    """
    if labels is not None and len(labels) != len(events):
        raise InputError("labels must match events one to one")
    if window[1] <= window[0]:
        raise InputError(f"epoch window {window} is empty")
    out = []
    for i, ev in enumerate(events):
        first, n = epoch_slice(ev.t_s, window, x.rate, x.header.start_time_s)
        if first < 0 or first + n > x.n_frames:
            raise WindowOutOfBounds(
                f"event {i} at {ev.t_s} s: window {window} exceeds the recording", index=i)
        label = None if labels is None else labels[i]
        out.append(Epoch(ev.t_s, np.array(x.samples[:, first:first + n], dtype=np.float64),
                         x.rate, label))
    return out


# --------------------------------------------------------------------------
# artifact windows

HF_CUTOFF_HZ = 30.0


def _zscore(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    if sd == 0 or not np.isfinite(sd):
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def artifact_scores(x: SessionData, window_len_s: float = 1.0) -> np.ndarray:
    """Combined score per window: summed z-scores of peak amplitude,
    mean channel variance and power above 30 Hz."""
    wlen = round_half_up(window_len_s * x.rate)
    n_windows = x.n_frames // wlen if wlen > 0 else 0
    if wlen < 2 or n_windows < 2:
        raise TooShort(f"recording of {x.duration_s} s is too short for {window_len_s} s windows")
    s = np.asarray(x.samples[:, :n_windows * wlen], dtype=np.float64)
    w = s.reshape(s.shape[0], n_windows, wlen).transpose(1, 0, 2)
    amplitude = np.abs(w).max(axis=(1, 2))
    variance = w.var(axis=2).mean(axis=1)
    freqs = np.fft.rfftfreq(wlen, 1.0 / x.rate)
    spec = np.abs(np.fft.rfft(w - w.mean(axis=2, keepdims=True), axis=2)) ** 2
    hf = freqs > HF_CUTOFF_HZ
    hf_power = spec[:, :, hf].mean(axis=(1, 2)) if hf.any() else np.zeros(n_windows)
    return _zscore(amplitude) + _zscore(variance) + _zscore(hf_power)


def reject_artifact_windows(x: SessionData, window_len_s: float = 1.0,
                            fraction: float = 0.02) -> RejectionMask:
    """Mark the worst ``fraction`` of non-overlapping windows.

    Exactly ``round(fraction * n_windows)`` windows are rejected; ties break
    toward the earlier window.
    """
    if not (0 < fraction < 1):
        raise InvalidFraction(f"fraction must lie in (0, 1), got {fraction}")
    if not window_len_s > 0:
        raise InputError("window_len_s must be positive")
    score = artifact_scores(x, window_len_s)
    n_reject = round_half_up(fraction * score.size)
    order = np.argsort(-score, kind="stable")
    rejected = tuple(sorted(int(i) for i in order[:n_reject]))
    return RejectionMask(window_len_s, rejected, fraction, score.size, x.header.start_time_s)
