"""Synthetic sessions with known workload and ERP ground truth.

Workload modulates frontal theta (up under load) and parietal/occipital
alpha (down under load) on top of 1/f background noise. Agreement adds a
negative Gaussian deflection on Fz and Cz after "incorrect" (or unexpected)
events. All amplitudes are oracle parameters for tests, not claims about real
EEG.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, IoFailure, TooShort
from .session import (
    EventRecord, RoundSpec, Session, SessionData, SessionHeader, SyncPairs, TranscriptWord,
    save_session,
)

__all__ = [
    "MODES", "SynthConfig", "pink_noise", "synth_workload_session", "synth_erp_session",
    "synthesize", "write_synth_bundle",
]

MODES = ("workload_calibration", "workload_conversation", "erp_calibration", "erp_conversation")
DEFAULT_CHANNELS = ("Fz", "F3", "F4", "Cz", "Pz", "P3", "P4", "Oz")

# relative gain of each oscillation per channel
THETA_GAINS = {"Fz": 1.0, "F3": 0.8, "F4": 0.8}
ALPHA_GAINS = {"Pz": 1.0, "P3": 0.8, "P4": 0.8, "Oz": 0.9}
ERP_CHANNELS = ("Fz", "Cz")

EXPECTEDNESS_SCALE = {"high": 0.0, "medium": 0.5, "low": 1.0}
RATING = {"high": "five", "medium": "three", "low": "one"}

SPELLING_WORDS = (
    "book", "garden", "rhythm", "necessary", "rendezvous", "bureaucracy",
    "conscientious", "onomatopoeia", "mnemonic", "antidisestablishmentarianism",
)
# sentence stems with a completion per expectedness level
STEMS = (
    ("she chopped onions before adding them to the", {"high": "soup", "medium": "bowl", "low": "car"}),
    ("before cooking he had to wash the", {"high": "dishes", "medium": "floor", "low": "moon"}),
    ("the children built a castle out of", {"high": "sand", "medium": "boxes", "low": "soup"}),
    ("he unlocked the door with his", {"high": "key", "medium": "card", "low": "banana"}),
    ("at night the sky was full of", {"high": "stars", "medium": "smoke", "low": "chairs"}),
    ("she poured a cup of hot", {"high": "tea", "medium": "water", "low": "gravel"}),
)


@dataclass(frozen=True)
class SynthConfig:
    mode: str = "workload_calibration"
    seed: int = 0
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    sample_rate_hz: float = 500.0
    noise_sigma_uv: float = 2.0
    theta_hz: float = 5.5
    alpha_hz: float = 10.0
    theta_amp_uv: tuple[float, float] = (1.0, 3.0)   # (low, high) load
    alpha_amp_uv: tuple[float, float] = (5.0, 2.0)   # (low, high) load
    erp_peak_uv: float = -5.0
    erp_latency_s: float = 0.400
    erp_width_s: float = 0.080                        # Gaussian standard deviation
    # workload calibration: trials per condition; erp calibration: total jumps
    n_trials: int | None = None
    trial_s: float = 10.0
    jump_interval_s: float = 3.0
    n_rounds: int = 10
    round_s: float = 40.0
    gap_s: float = 2.0
    n_scenes: int = 10
    trials_per_scene: int = 6
    conv_trial_s: float = 6.0
    lead_s: float = 2.0
    sync_offset_s: float = 1.25

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.theta_amp_uv[1] > self.theta_amp_uv[0]:
            raise InvalidConfig("theta amplitude must increase with load")
        if not self.alpha_amp_uv[1] < self.alpha_amp_uv[0]:
            raise InvalidConfig("alpha amplitude must decrease with load")
        if self.noise_sigma_uv < 0 or self.sample_rate_hz <= 0:
            raise InvalidConfig("noise sigma must be >= 0 and sample rate > 0")
        if len(set(self.channels)) != len(self.channels) or len(self.channels) < 2:
            raise InvalidConfig("need at least two unique channels")
        for name in ("trial_s", "jump_interval_s", "round_s", "conv_trial_s", "erp_width_s"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.n_trials is not None and self.n_trials < 1:
            raise InvalidConfig("n_trials must be positive")
        if self.n_rounds < 1 or self.n_scenes < 1 or self.trials_per_scene < 1:
            raise InvalidConfig("counts must be positive")

    @property
    def trials(self) -> int:
        if self.n_trials is not None:
            return self.n_trials
        return 20 if self.mode == "workload_calibration" else 171


def pink_noise(n_frames: int, sigma_uv: float, seed=0) -> np.ndarray:
    """Zero-mean 1/f noise with sample standard deviation exactly ``sigma_uv``.

    White Gaussian noise is shaped in the frequency domain by ``1/sqrt(f)``
    (power ~ 1/f); the DC bin is zeroed. ``seed`` may be an int or a
    :class:`numpy.random.Generator`.
    """
    if n_frames < 256:
        raise TooShort(f"pink noise needs at least 256 frames, got {n_frames}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n_frames))
    f = np.fft.rfftfreq(n_frames)
    shape = np.zeros_like(f)
    shape[1:] = 1.0 / np.sqrt(f[1:])
    x = np.fft.irfft(spec * shape, n_frames)
    x -= x.mean()
    sd = x.std()
    return x * (sigma_uv / sd) if sd > 0 else x


def _background(cfg: SynthConfig, n: int, rng) -> np.ndarray:
    if cfg.noise_sigma_uv == 0:
        return np.zeros((len(cfg.channels), n))
    return np.stack([pink_noise(n, cfg.noise_sigma_uv, rng) for _ in cfg.channels])


def _gain_vectors(cfg):
    theta = np.array([THETA_GAINS.get(c, 0.0) for c in cfg.channels])
    alpha = np.array([ALPHA_GAINS.get(c, 0.0) for c in cfg.channels])
    if not theta.any() or not alpha.any():
        raise InvalidConfig("channels must include frontal (Fz/F3/F4) and posterior "
                            "(Pz/P3/P4/Oz) sites")
    return theta, alpha


def _add_oscillations(x, cfg, segments, rng):
    """Add theta/alpha per segment ``(first, last, load)``; load 0 = low, 1 = high."""
    theta_g, alpha_g = _gain_vectors(cfg)
    fs = cfg.sample_rate_hz
    for first, last, load in segments:
        t = np.arange(last - first) / fs
        a_th = cfg.theta_amp_uv[0] + load * (cfg.theta_amp_uv[1] - cfg.theta_amp_uv[0])
        a_al = cfg.alpha_amp_uv[0] + load * (cfg.alpha_amp_uv[1] - cfg.alpha_amp_uv[0])
        ph_th, ph_al = rng.uniform(0, 2 * np.pi, 2)
        x[:, first:last] += np.outer(theta_g, a_th * np.sin(2 * np.pi * cfg.theta_hz * t + ph_th))
        x[:, first:last] += np.outer(alpha_g, a_al * np.sin(2 * np.pi * cfg.alpha_hz * t + ph_al))


def _data(cfg, x) -> SessionData:
    return SessionData(SessionHeader(cfg.sample_rate_hz, cfg.channels, 0.0),
                       x.astype(np.float32))


def _sync(cfg, duration_s) -> SyncPairs:
    off = cfg.sync_offset_s
    return SyncPairs(((0.0, off), (duration_s - off, duration_s)))


def _frame(t, fs):
    return int(round(t * fs))


def synth_workload_session(cfg: SynthConfig) -> tuple[Session, dict]:
    """Workload calibration (alternating 10 s high/low phases) or a
    conversation whose load ramps linearly from round 1 to the last round."""
    rng = np.random.default_rng(cfg.seed)
    fs = cfg.sample_rate_hz
    truth = {"config": _config_dict(cfg)}
    if cfg.mode == "workload_calibration":
        n_phases = 2 * cfg.trials
        duration = n_phases * cfg.trial_s
        n = _frame(duration, fs)
        x = _background(cfg, n, rng)
        segments, events, labels = [], [], []
        for i in range(n_phases):
            cond = "high" if i % 2 == 0 else "low"
            t = i * cfg.trial_s
            segments.append((_frame(t, fs), _frame(t + cfg.trial_s, fs), 1.0 if cond == "high" else 0.0))
            events.append(EventRecord(t, "workload_phase",
                                      {"condition": cond, "duration_s": repr(cfg.trial_s)}))
            labels.append({"t_s": t, "condition": cond, "class": int(cond == "high")})
        _add_oscillations(x, cfg, segments, rng)
        truth["events"] = labels
        return Session(_data(cfg, x), tuple(events)), truth

    if cfg.mode != "workload_conversation":
        raise InvalidConfig(f"{cfg.mode} is not a workload mode")
    period = cfg.round_s + cfg.gap_s
    duration = cfg.lead_s + cfg.n_rounds * period
    n = _frame(duration, fs)
    x = _background(cfg, n, rng)
    segments = [(0, _frame(cfg.lead_s, fs), 0.0)]
    rounds, events, words, levels = [], [], [], []
    for r in range(1, cfg.n_rounds + 1):
        load = (r - 1) / (cfg.n_rounds - 1) if cfg.n_rounds > 1 else 0.0
        start = cfg.lead_s + (r - 1) * period
        end = start + cfg.round_s
        segments.append((_frame(start, fs), _frame(start + period, fs), load))
        rounds.append(RoundSpec(r, start, end))
        events.append(EventRecord(start, "round_start", {"round": str(r)}))
        levels.append({"round": r, "load": load,
                       "theta_amp_uv": cfg.theta_amp_uv[0] + load * (cfg.theta_amp_uv[1] - cfg.theta_amp_uv[0]),
                       "alpha_amp_uv": cfg.alpha_amp_uv[0] + load * (cfg.alpha_amp_uv[1] - cfg.alpha_amp_uv[0])})
        words.extend(_spelling_round(cfg, r, start, end))
    _add_oscillations(x, cfg, segments, rng)
    truth["rounds"] = levels
    session = Session(_data(cfg, x), tuple(events), tuple(words), tuple(rounds),
                      _sync(cfg, duration))
    return session, truth


def _spelling_round(cfg, r, start, end):
    """Transcript (audio clock) for one spelling round."""
    target = SPELLING_WORDS[(r - 1) % len(SPELLING_WORDS)]
    off = cfg.sync_offset_s
    script = [("agent", "round", 0.5), ("agent", str(r), 0.4), ("agent", "spell", 0.4),
              ("agent", target, 0.8), ("participant", target, 0.9)]
    script += [("participant", ch.upper(), 0.35) for ch in target]
    script += [("agent", "correct" if r not in (4, 7) else "wrong", 0.5)]
    t = start + 0.5
    out = []
    for speaker, word, dur in script:
        if t + dur > end:
            break
        out.append(TranscriptWord(word, t - off, t + dur - off, speaker))
        t += dur + 0.1
    return out


def _erp_template(cfg, n_frames):
    t = np.arange(n_frames) / cfg.sample_rate_hz - cfg.erp_latency_s
    return cfg.erp_peak_uv * np.exp(-0.5 * (t / cfg.erp_width_s) ** 2)


def _add_erp(x, cfg, t_event, scale):
    if scale == 0:
        return
    fs = cfg.sample_rate_hz
    span = cfg.erp_latency_s + 5 * cfg.erp_width_s
    first = _frame(t_event, fs)
    last = min(x.shape[1], first + _frame(span, fs))
    tmpl = scale * _erp_template(cfg, last - first)
    for c in ERP_CHANNELS:
        if c in cfg.channels:
            x[cfg.channels.index(c), first:last] += tmpl


def synth_erp_session(cfg: SynthConfig) -> tuple[Session, dict]:
    """Grid-jump calibration (angle 30 or 120 degrees) or a sentence-completion
    conversation with high/medium/low expectedness completions."""
    if not any(c in cfg.channels for c in ERP_CHANNELS):
        raise InvalidConfig("channels must include Fz or Cz")
    rng = np.random.default_rng(cfg.seed)
    fs = cfg.sample_rate_hz
    truth = {"config": _config_dict(cfg)}
    if cfg.mode == "erp_calibration":
        n_trials = cfg.trials
        classes = np.array([1] * ((n_trials + 1) // 2) + [0] * (n_trials // 2))
        rng.shuffle(classes)
        duration = cfg.lead_s + n_trials * cfg.jump_interval_s
        n = _frame(duration, fs)
        x = _background(cfg, n, rng)
        events, labels = [], []
        for i, cls in enumerate(classes):
            t = cfg.lead_s + i * cfg.jump_interval_s + min(1.0, cfg.jump_interval_s / 3)
            angle = 30.0 if cls == 1 else 120.0
            _add_erp(x, cfg, t, 0.0 if cls == 1 else 1.0)
            events.append(EventRecord(t, "jump", {"angle_deg": repr(angle)}))
            labels.append({"t_s": t, "angle_deg": angle, "class": int(cls)})
        truth["events"] = labels
        return Session(_data(cfg, x), tuple(events)), truth

    if cfg.mode != "erp_conversation":
        raise InvalidConfig(f"{cfg.mode} is not an ERP mode")
    n_trials = cfg.n_scenes * cfg.trials_per_scene
    levels = np.array(["high", "medium", "low"] * (n_trials // 3)
                      + ["high", "medium", "low"][:n_trials % 3])
    rng.shuffle(levels)
    duration = cfg.lead_s + n_trials * cfg.conv_trial_s
    n = _frame(duration, fs)
    x = _background(cfg, n, rng)
    off = cfg.sync_offset_s
    events, words, labels = [], [], []
    for i, level in enumerate(levels):
        stem, completions = STEMS[i % len(STEMS)]
        t = cfg.lead_s + i * cfg.conv_trial_s + 0.3
        for w in stem.split():
            words.append(TranscriptWord(w, t - off, t + 0.25 - off, "agent"))
            t += 0.3
        completion = completions[level]
        onset = t + 0.1
        words.append(TranscriptWord(completion, onset - off, onset + 0.45 - off, "agent"))
        _add_erp(x, cfg, onset, EXPECTEDNESS_SCALE[level])
        events.append(EventRecord(onset, "completion", {
            "expectedness": str(level), "word": completion,
            "scene": str(i // cfg.trials_per_scene + 1), "trial": str(i + 1)}))
        r = onset + 1.5
        words.append(TranscriptWord(RATING[level], r - off, r + 0.4 - off, "participant"))
        expected = completions["high"] if level != "high" else "expected"
        words.append(TranscriptWord(expected, r + 0.6 - off, r + 1.1 - off, "participant"))
        labels.append({"t_s": onset, "expectedness": str(level), "word": completion,
                       "deflection_scale": EXPECTEDNESS_SCALE[level]})
    truth["events"] = labels
    session = Session(_data(cfg, x), tuple(events), tuple(words), (), _sync(cfg, duration))
    return session, truth


def _config_dict(cfg: SynthConfig) -> dict:
    d = asdict(cfg)
    d["channels"] = list(cfg.channels)
    d["n_trials"] = cfg.trials
    return d


def synthesize(cfg: SynthConfig) -> tuple[Session, dict]:
    """Generate the session for ``cfg.mode`` plus its ground-truth record."""
    if cfg.mode.startswith("workload"):
        return synth_workload_session(cfg)
    return synth_erp_session(cfg)


def write_synth_bundle(cfg: SynthConfig, dir_path) -> Session:
    """Write a session bundle and ``ground_truth.json`` for ``cfg``."""
    session, truth = synthesize(cfg)
    save_session(session, dir_path)
    try:
        (Path(dir_path) / "ground_truth.json").write_text(
            json.dumps(truth, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write ground truth: {exc}") from exc
    return session
