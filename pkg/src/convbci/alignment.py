"""Audio/EEG clock mapping, word alignment and round-level statistics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import (
    DriftOutOfRange,
    EmptyPairs,
    EmptyRound,
    EmptyTrace,
    IoFailure,
    MalformedRecord,
    MissingFile,
    TooFewRounds,
    ZeroVarianceX,
)
from .session import PredictionTrace, RoundSpec, SyncPairs, TranscriptWord

__all__ = [
    "POST_WINDOW_S", "RHO_MAX", "ClockMap", "WordAlignment", "RoundSummary",
    "TrendReport", "fit_clock_map", "tick_range", "align_words", "round_means",
    "ols_trend", "save_words_csv", "load_words_csv", "analysis_report", "save_analysis",
]

POST_WINDOW_S = 0.8
RHO_MAX = 0.999
DRIFT_RANGE = (0.9, 1.1)
# tick times within this many ticks of a boundary count as on it
_TICK_EPS = 1e-9


@dataclass(frozen=True)
class ClockMap:
    """EEG time ``e = drift * a + offset_s`` for audio time ``a``."""

    offset_s: float
    drift: float = 1.0
    rms_residual_s: float = 0.0

    def to_eeg(self, audio_t):
        return self.drift * np.asarray(audio_t, dtype=np.float64) + self.offset_s


def fit_clock_map(sync: SyncPairs | Sequence[tuple[float, float]]) -> ClockMap:
    """Least-squares line through (audio, EEG) pairs.

    A single pair fixes the drift at 1 and only estimates the offset.
    """
    pairs = sync.pairs if isinstance(sync, SyncPairs) else tuple(sync)
    if not pairs:
        raise EmptyPairs("no sync pairs")
    a = np.array([p[0] for p in pairs], dtype=np.float64)
    e = np.array([p[1] for p in pairs], dtype=np.float64)
    if a.size == 1:
        return ClockMap(float(e[0] - a[0]), 1.0, 0.0)
    am, em = a.mean(), e.mean()
    saa = np.sum((a - am) ** 2)
    if saa == 0:
        raise EmptyPairs("sync pairs share one audio time")
    drift = float(np.sum((a - am) * (e - em)) / saa)
    if not DRIFT_RANGE[0] < drift < DRIFT_RANGE[1]:
        raise DriftOutOfRange(f"clock drift {drift} outside {DRIFT_RANGE}")
    offset = float(em - drift * am)
    resid = e - (drift * a + offset)
    return ClockMap(offset, drift, float(np.sqrt(np.mean(resid ** 2))))


def tick_range(trace: PredictionTrace, start_s: float, end_s: float) -> tuple[int, int]:
    """Indices ``[lo, hi)`` of ticks whose time lies in ``[start_s, end_s)``."""
    n = len(trace)
    lo = math.ceil((start_s - trace.t0_s) * trace.rate_hz - _TICK_EPS)
    hi = math.ceil((end_s - trace.t0_s) * trace.rate_hz - _TICK_EPS)
    lo, hi = min(max(lo, 0), n), min(max(hi, 0), n)
    return lo, max(lo, hi)


@dataclass(frozen=True)
class WordAlignment:
    word: str
    speaker: str
    onset_eeg_s: float
    offset_eeg_s: float
    mean_value: float
    max_value: float
    min_value: float
    post_window_mean: float
    n_ticks: int = 0

    @property
    def absent(self) -> bool:
        return self.n_ticks == 0


def align_words(trace: PredictionTrace, transcript: Sequence[TranscriptWord],
                clock: ClockMap, post_window_s: float = POST_WINDOW_S) -> list[WordAlignment]:
    """Summarize the trace over each word's span on the EEG clock.

    A word covers ticks in ``[onset, offset)``. Words without any tick are
    kept with NaN statistics (``absent``). The post-onset mean covers
    ``[onset, onset + post_window_s)`` clipped to the trace.
    """
    if len(trace) == 0:
        raise EmptyTrace("cannot align words to an empty trace")
    v = trace.values
    out = []
    for w in transcript:
        on = float(clock.to_eeg(w.onset_s))
        off = float(clock.to_eeg(w.offset_s))
        lo, hi = tick_range(trace, on, off)
        plo, phi = tick_range(trace, on, on + post_window_s)
        post = float(v[plo:phi].mean()) if phi > plo else math.nan
        if hi > lo:
            seg = v[lo:hi]
            out.append(WordAlignment(w.word, w.speaker, on, off, float(seg.mean()),
                                     float(seg.max()), float(seg.min()), post, hi - lo))
        else:
            out.append(WordAlignment(w.word, w.speaker, on, off, math.nan, math.nan,
                                     math.nan, post, 0))
    return out


@dataclass(frozen=True)
class RoundSummary:
    round: int
    n_ticks: int
    mean: float
    rho_hat: float
    n_eff: float
    ci_lo: float
    ci_hi: float
    sd: float = 0.0


def _lag1_rho(x: np.ndarray) -> float:
    if x.size < 3:
        return 0.0
    a, b = x[:-1] - x[:-1].mean(), x[1:] - x[1:].mean()
    den = math.sqrt(float(np.sum(a * a)) * float(np.sum(b * b)))
    if den == 0:
        return 0.0
    return float(np.sum(a * b)) / den


def ar1_mean_ci(x: np.ndarray, alpha: float = 0.05) -> RoundSummary:
    """Mean with an AR(1)-adjusted t-interval, for a single series.

    ``rho`` is the lag-1 Pearson correlation clamped to ``[0, 0.999]``;
    ``n_eff = n (1 - rho) / (1 + rho)`` and the half-width is
    ``t(1 - alpha/2, n_eff - 1) * s / sqrt(n_eff)`` with ``df`` floored at 1.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    rho = min(max(_lag1_rho(x), 0.0), RHO_MAX) if sd > 0 else 0.0
    n_eff = n * (1 - rho) / (1 + rho)
    if sd == 0:
        return RoundSummary(0, n, mean, rho, n_eff, mean, mean, sd)
    df = max(n_eff - 1.0, 1.0)
    half = float(stats.t.ppf(1 - alpha / 2, df)) * sd / math.sqrt(n_eff)
    return RoundSummary(0, n, mean, rho, n_eff, mean - half, mean + half, sd)


def round_means(trace: PredictionTrace, rounds: Sequence[RoundSpec],
                alpha: float = 0.05) -> list[RoundSummary]:
    """Per-round mean of the ticks in ``[start_s, end_s)`` with AR(1)-aware CI."""
    out = []
    for r in rounds:
        lo, hi = tick_range(trace, r.start_s, r.end_s)
        if hi <= lo:
            raise EmptyRound(f"round {r.round} [{r.start_s}, {r.end_s}) contains no ticks")
        s = ar1_mean_ci(trace.values[lo:hi], alpha)
        out.append(RoundSummary(r.round, s.n_ticks, s.mean, s.rho_hat, s.n_eff,
                                s.ci_lo, s.ci_hi, s.sd))
    return out


@dataclass(frozen=True)
class TrendReport:
    slope: float
    intercept: float
    ci_lo: float
    ci_hi: float
    p_value: float
    r_squared: float
    cumulative_change: float
    significant: bool
    n_rounds: int = 0
    alpha: float = 0.05


def ols_trend(points, alpha: float = 0.05) -> TrendReport:
    """OLS line through (round index, mean) points with a two-sided CI on the slope.

    ``cumulative_change`` is ``slope * (n - 1)``, the fitted change from the
    first to the last of ``n`` rounds. With a perfect fit the CI collapses to
    the slope and ``p`` is 0 (1 if the slope is also 0).
    """
    if points and isinstance(points[0], RoundSummary):
        points = [(p.round, p.mean) for p in points]
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    if n < 3:
        raise TooFewRounds(f"need at least 3 rounds, got {n}")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise ZeroVarianceX("all round indices are equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    rss = float(np.sum(resid ** 2))
    tss = float(np.sum((y - ym) ** 2))
    se = math.sqrt(rss / (n - 2) / sxx)
    if se == 0:
        half, p = 0.0, (0.0 if slope != 0 else 1.0)
    else:
        half = float(stats.t.ppf(1 - alpha / 2, n - 2)) * se
        p = float(2 * stats.t.sf(abs(slope / se), n - 2))
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    lo, hi = slope - half, slope + half
    return TrendReport(slope, intercept, lo, hi, p, r2, slope * (n - 1),
                       bool(lo > 0 or hi < 0), n, alpha)


# --------------------------------------------------------------------------
# output formats

WORDS_HEADER = ["word", "speaker", "onset_eeg_s", "offset_eeg_s", "mean", "max", "min",
                "post_mean", "absent"]


def _num(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def save_words_csv(rows: Sequence[WordAlignment], path) -> None:
    try:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(WORDS_HEADER)
            for r in rows:
                wr.writerow([r.word, r.speaker, repr(r.onset_eeg_s), repr(r.offset_eeg_s),
                             _num(r.mean_value), _num(r.max_value), _num(r.min_value),
                             _num(r.post_window_mean), "true" if r.absent else "false"])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_words_csv(path) -> list[WordAlignment]:
    """Read a words table back; ``n_ticks`` is not stored and reloads as 1 or 0."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise MissingFile(f"missing words file: {path}") from None
    if not rows or rows[0] != WORDS_HEADER:
        raise MalformedRecord(f"{path.name}: unexpected header", 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(WORDS_HEADER):
            raise MalformedRecord(f"{path.name}: expected {len(WORDS_HEADER)} columns", lineno)
        try:
            nums = [math.nan if c == "" else float(c) for c in row[2:8]]
        except ValueError:
            raise MalformedRecord(f"{path.name}: bad number", lineno) from None
        absent = row[8] == "true"
        out.append(WordAlignment(row[0], row[1], *nums, n_ticks=0 if absent else 1))
    return out


def analysis_report(rounds: Sequence[RoundSummary], trend: TrendReport) -> dict:
    return {
        "rounds": [{"round": r.round, "mean": r.mean, "ci_lo": r.ci_lo, "ci_hi": r.ci_hi,
                    "rho_hat": r.rho_hat, "n_eff": r.n_eff, "n_ticks": r.n_ticks}
                   for r in rounds],
        "trend": {"slope": trend.slope, "intercept": trend.intercept,
                  "ci": [trend.ci_lo, trend.ci_hi], "p": trend.p_value,
                  "r2": trend.r_squared, "cumulative": trend.cumulative_change,
                  "significant": trend.significant},
    }


def save_analysis(report: dict, path) -> None:
    try:
        Path(path).write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
