"""Pseudo-online replay of a trained model over a whole recording.

:class:`OnlinePipeline` is a causal state machine: frames are pushed in
arbitrary chunks, filter states carry across chunks, and a decision value is
emitted at every tick (50 Hz by default) as soon as a full trailing window is
available. Pushing a recording in one piece or in many chunks yields
bit-identical output.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy import signal

from .classifier import LinearModel, predict_many, require_kind
from .dsp import ANTIALIAS_FRACTION, design_sos, rational_ratio, round_half_up
from .errors import (
    ChannelMismatch,
    EmptyTrace,
    InputError,
    IoFailure,
    MalformedRecord,
    MissingFile,
    SessionTooShort,
)
from .features import WindowSpec, _logvar, bank_from_meta, project, window_means_array
from .session import PredictionTrace, Session

__all__ = [
    "TICK_RATE_HZ", "OnlinePipeline", "simulate_online", "simulate_spectral",
    "simulate_erp", "normalize_trace", "trace_to_csv", "trace_from_csv",
]

TICK_RATE_HZ = 50.0
_TICK_BLOCK = 4096


class OnlinePipeline:
    """Causal feature extraction and classification at a fixed tick rate.

    Parameters
    ----------
    model : LinearModel
        A workload (CSP log-variance) or agreement (windowed means) model.
    source_rate_hz : float
        Sampling rate of the frames that will be pushed.
    tick_rate_hz : float
        Output rate; must divide the model's feature rate.

    Notes
    -----
    Per frame: average reference, causal anti-alias low-pass and decimation
    to the feature rate, causal band-pass(es). A tick at time ``t`` sees only
    feature-rate frames in ``[t - window_s, t)``. For the agreement model
    that window is a pseudo-epoch with onset ``t - window_s``.
    """

    def __init__(self, model: LinearModel, source_rate_hz: float,
                 tick_rate_hz: float = TICK_RATE_HZ):
        meta = model.feature_meta
        try:
            self.feature_rate = float(meta["feature_rate_hz"])
            self.window_s = float(meta["window_s"])
        except (KeyError, TypeError, ValueError):
            raise InputError("model feature_meta lacks feature_rate_hz/window_s") from None
        self.model = model
        self.source_rate = float(source_rate_hz)
        self.tick_rate = float(tick_rate_hz)
        self.window = round_half_up(self.window_s * self.feature_rate)
        if abs(self.window - self.window_s * self.feature_rate) > 1e-9:
            raise InputError("window_s must span a whole number of feature frames")
        step = self.feature_rate / self.tick_rate
        if abs(step - round(step)) > 1e-9 or step < 1:
            raise InputError(f"tick rate {tick_rate_hz} Hz must divide {self.feature_rate} Hz")
        self.step = int(round(step))

        self.up, self.down = rational_ratio(self.source_rate, self.feature_rate)
        self._aa = None
        if (self.up, self.down) != (1, 1):
            self._aa = design_sos("lowpass", ANTIALIAS_FRACTION * self.feature_rate / 2.0,
                                  self.source_rate * self.up)
        n_ch = len(model.channels)

        if model.kind == "workload":
            self.bank = bank_from_meta(meta)
            self._bands = [design_sos("bandpass", b.as_list(), self.feature_rate)
                           for b in self.bank.bands]
            self.spec = None
        else:
            self.bank = None
            self.spec = WindowSpec.from_dict(meta["windows"])
            if self.spec.end_frame > self.window:
                raise InputError("ERP windows extend past the trailing window")
            lo, hi = meta["band"]
            self._bands = [design_sos("bandpass", [lo, hi], self.feature_rate)]

        self._aa_zi = None if self._aa is None else np.zeros((self._aa.shape[0], n_ch, 2))
        self._band_zi = [np.zeros((s.shape[0], n_ch, 2)) for s in self._bands]
        self._n_up = 0
        self._n_frames = 0
        self._next_tick = 0
        self._hist = None

    @property
    def t0_offset_s(self) -> float:
        """Time of the first tick relative to the first pushed frame."""
        return self.window / self.feature_rate

    def _decimate(self, x: np.ndarray) -> np.ndarray:
        if self._aa is None:
            return x
        if self.up > 1:
            up = np.zeros((x.shape[0], x.shape[1] * self.up))
            up[:, ::self.up] = x * self.up
        else:
            up = x
        y, self._aa_zi = signal.sosfilt(self._aa, up, axis=-1, zi=self._aa_zi)
        first = (-self._n_up) % self.down
        self._n_up += up.shape[1]
        return y[:, first::self.down]

    def _band_signals(self, y: np.ndarray) -> np.ndarray:
        if y.shape[1] == 0:
            # chunk shorter than the decimation step: filter states stay put
            rows = y.shape[0] if self.bank is None else self.bank.filters[0].shape[1]
            return np.zeros((len(self._bands), rows, 0))
        outs = []
        for i, sos in enumerate(self._bands):
            yb, self._band_zi[i] = signal.sosfilt(sos, y, axis=-1, zi=self._band_zi[i])
            outs.append(project(self.bank.filters[i], yb) if self.bank is not None else yb)
        return np.stack(outs)

    def _features(self, windows: np.ndarray) -> np.ndarray:
        # windows: (bands, ticks, rows, frames)
        if self.bank is not None:
            return np.concatenate([_logvar(w) for w in windows], axis=-1)
        return window_means_array(windows[0], self.spec)

    def push(self, frames) -> np.ndarray:
        """Consume channels x n frames (model channel order); return new tick values."""
        x = np.asarray(frames, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != len(self.model.channels):
            raise ChannelMismatch(f"expected {len(self.model.channels)} channel rows")
        x = x - x.mean(axis=0, keepdims=True)
        new = self._band_signals(self._decimate(x))
        buf = new if self._hist is None else np.concatenate([self._hist, new], axis=-1)
        offset = self._n_frames - (0 if self._hist is None else self._hist.shape[-1])
        self._n_frames += new.shape[-1]

        last = (self._n_frames - self.window) // self.step
        ks = np.arange(self._next_tick, last + 1)
        values = np.empty(ks.size)
        if ks.size:
            view = np.lib.stride_tricks.sliding_window_view(buf, self.window, axis=-1)
            starts = ks * self.step - offset
            for b in range(0, ks.size, _TICK_BLOCK):
                sel = starts[b:b + _TICK_BLOCK]
                win = np.ascontiguousarray(view[:, :, sel].transpose(0, 2, 1, 3))
                values[b:b + sel.size] = predict_many(self.model, self._features(win))
            self._next_tick = int(last) + 1
        keep_from = self._next_tick * self.step - offset
        self._hist = buf[..., max(keep_from, 0):]
        return values


def _model_order(session: Session, model: LinearModel) -> np.ndarray:
    names = list(session.header.channels)
    if not model.channels:
        raise ChannelMismatch("model does not record its channel list")
    if sorted(names) != sorted(model.channels):
        raise ChannelMismatch(
            f"session channels {names} do not match model channels {list(model.channels)}")
    return np.array([names.index(c) for c in model.channels])


def _simulate(session: Session, model: LinearModel, tick_rate_hz: float,
              chunk_s: float | None) -> PredictionTrace:
    order = _model_order(session, model)
    pipe = OnlinePipeline(model, session.data.rate, tick_rate_hz)
    if not session.data.duration_s > pipe.window_s:
        raise SessionTooShort(
            f"session of {session.data.duration_s} s is not longer than the {pipe.window_s} s window")
    x = session.data.samples[order]
    if chunk_s is None:
        values = pipe.push(x)
    else:
        n = max(1, int(round(chunk_s * session.data.rate)))
        values = np.concatenate([pipe.push(x[:, i:i + n]) for i in range(0, x.shape[1], n)])
    if values.size == 0:
        raise SessionTooShort("session yields no complete window")
    return PredictionTrace(values, session.header.start_time_s + pipe.t0_offset_s, tick_rate_hz)


def simulate_spectral(session: Session, model: LinearModel, tick_rate_hz: float = TICK_RATE_HZ,
                      chunk_s: float | None = None) -> PredictionTrace:
    require_kind(model, "workload")
    return _simulate(session, model, tick_rate_hz, chunk_s)


def simulate_erp(session: Session, model: LinearModel, tick_rate_hz: float = TICK_RATE_HZ,
                 chunk_s: float | None = None) -> PredictionTrace:
    require_kind(model, "agreement")
    return _simulate(session, model, tick_rate_hz, chunk_s)


def simulate_online(session: Session, model: LinearModel, tick_rate_hz: float = TICK_RATE_HZ,
                    chunk_s: float | None = None) -> PredictionTrace:
    """Replay ``session`` through ``model`` and return the 50 Hz trace.

    ``chunk_s`` feeds the recording in pieces of that length instead of all
    at once; the output is identical either way.
    """
    if model.kind == "workload":
        return simulate_spectral(session, model, tick_rate_hz, chunk_s)
    return simulate_erp(session, model, tick_rate_hz, chunk_s)


def normalize_trace(trace: PredictionTrace, mode: str = "minmax_pm1") -> PredictionTrace:
    """Rescale into [-1, 1] keeping zero fixed.

    Positive values are divided by the maximum, negative ones by the
    magnitude of the minimum.
    """
    if len(trace) == 0:
        raise EmptyTrace("cannot normalize an empty trace")
    if mode == "none":
        return trace
    if mode != "minmax_pm1":
        raise InputError(f"unknown normalization {mode!r}")
    v = trace.values.copy()
    pos, neg = v > 0, v < 0
    if pos.any():
        v[pos] = v[pos] / v[pos].max()
    if neg.any():
        v[neg] = v[neg] / -v[neg].min()
    return PredictionTrace(v, trace.t0_s, trace.rate_hz)


def trace_to_csv(trace: PredictionTrace, path) -> None:
    if len(trace) == 0:
        raise EmptyTrace("refusing to write an empty trace")
    lines = ["t_s,value\n"]
    t = trace.times
    lines.extend(f"{ti!r},{vi!r}\n" for ti, vi in zip(t.tolist(), trace.values.tolist()))
    try:
        Path(path).write_text("".join(lines), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def trace_from_csv(path, rate_hz: float | None = None) -> PredictionTrace:
    """Read a ``t_s,value`` file.

    The tick rate is inferred from the time column unless given (a single-row
    file defaults to 50 Hz).
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise MissingFile(f"missing trace file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != ["t_s", "value"]:
        raise MalformedRecord(f"{path.name}: header must be 't_s,value'", 1)
    t, v = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            ti, vi = (float(c) for c in row)
        except ValueError:
            raise MalformedRecord(f"{path.name}: expected two numbers", lineno) from None
        t.append(ti)
        v.append(vi)
    if not v:
        raise EmptyTrace(f"{path.name} holds no ticks")
    if rate_hz is None:
        rate_hz = TICK_RATE_HZ
        if len(t) > 1:
            rate_hz = round((len(t) - 1) / (t[-1] - t[0]), 6)
    return PredictionTrace(np.array(v), t[0], rate_hz)
