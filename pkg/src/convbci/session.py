"""Session bundle records and their on-disk format.

A session bundle is a directory::

    session.json       header (rate, channel names, start time, data file)
    eeg.f32            little-endian float32 samples, frame-major, no header
    events.jsonl       optional, one event per line
    transcript.jsonl   optional, one word per line (audio clock)
    rounds.json        optional, list of task rounds (EEG clock)
    sync.json          optional, audio/EEG clock pairs

All times are seconds. ``t = header.start_time_s`` is the time of frame 0.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InputError,
    IoFailure,
    MalformedHeader,
    MalformedRecord,
    MissingFile,
    NonFiniteSample,
    NonMonotonicTimestamps,
    OverlappingRounds,
    SampleCountMismatch,
)

__all__ = [
    "SessionHeader", "SessionData", "EventRecord", "TranscriptWord",
    "RoundSpec", "SyncPairs", "PredictionTrace", "Session",
    "load_session", "save_session", "load_events", "load_transcript",
    "load_rounds", "load_sync", "save_events", "save_transcript",
    "save_rounds", "save_sync",
]

FORMAT_VERSION = 1
UNITS = "microvolts"
SPEAKERS = ("participant", "agent")
_RAW_DTYPE = np.dtype("<f4")

SESSION_FILE = "session.json"
DATA_FILE = "eeg.f32"
EVENTS_FILE = "events.jsonl"
TRANSCRIPT_FILE = "transcript.jsonl"
ROUNDS_FILE = "rounds.json"
SYNC_FILE = "sync.json"


@dataclass(frozen=True)
class SessionHeader:
    sample_rate_hz: float
    channels: tuple[str, ...]
    start_time_s: float = 0.0
    version: int = FORMAT_VERSION
    units: str = UNITS

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        rate = self.sample_rate_hz
        if not (isinstance(rate, (int, float)) and math.isfinite(rate) and rate > 0):
            raise MalformedHeader(f"sample_rate_hz must be a positive number, got {rate!r}")
        if not self.channels:
            raise MalformedHeader("channel list is empty")
        if any(not isinstance(c, str) or not c for c in self.channels):
            raise MalformedHeader("channel names must be non-empty strings")
        if len(set(self.channels)) != len(self.channels):
            raise MalformedHeader("channel names must be unique")
        if not math.isfinite(self.start_time_s):
            raise MalformedHeader("start_time_s must be finite")
        if self.units != UNITS:
            raise MalformedHeader(f"units must be {UNITS!r}, got {self.units!r}")

    @property
    def n_channels(self) -> int:
        return len(self.channels)


@dataclass(frozen=True, eq=False)
class SessionData:
    """Header plus a channels x frames sample matrix in microvolts.

    The matrix is copied on construction and marked read-only.
    """

    header: SessionHeader
    samples: np.ndarray

    def __post_init__(self):
        x = np.array(self.samples, copy=True)
        if x.dtype.kind != "f":
            x = x.astype(np.float64)
        if x.ndim != 2:
            raise InputError(f"samples must be 2-D (channels x frames), got shape {x.shape}")
        if x.shape[0] != self.header.n_channels:
            raise SampleCountMismatch(
                f"{x.shape[0]} sample rows for {self.header.n_channels} channels")
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            raise NonFiniteSample(
                f"non-finite sample at channel {self.header.channels[bad[0]]!r}, frame {bad[1]}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)

    @property
    def rate(self) -> float:
        return self.header.sample_rate_hz

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.rate

    def replace(self, samples: np.ndarray, sample_rate_hz: float | None = None) -> "SessionData":
        """Return a copy carrying new samples (and optionally a new rate)."""
        h = self.header
        if sample_rate_hz is not None:
            h = SessionHeader(sample_rate_hz, h.channels, h.start_time_s, h.version, h.units)
        return SessionData(h, samples)

    def __eq__(self, other):
        if not isinstance(other, SessionData):
            return NotImplemented
        return (self.header == other.header
                and self.samples.dtype == other.samples.dtype
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class EventRecord:
    t_s: float
    label: str
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.t_s) or self.t_s < 0:
            raise InputError(f"event time must be finite and >= 0, got {self.t_s!r}")
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in dict(self.meta).items()})


@dataclass(frozen=True)
class TranscriptWord:
    word: str
    onset_s: float
    offset_s: float
    speaker: str

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise InputError(f"speaker must be one of {SPEAKERS}, got {self.speaker!r}")
        if not (math.isfinite(self.onset_s) and math.isfinite(self.offset_s)):
            raise InputError("word times must be finite")
        if not self.offset_s > self.onset_s:
            raise InputError(
                f"word {self.word!r}: offset {self.offset_s} not after onset {self.onset_s}")


@dataclass(frozen=True)
class RoundSpec:
    round: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise InputError(f"round {self.round}: end {self.end_s} not after start {self.start_s}")


@dataclass(frozen=True)
class SyncPairs:
    """Matching (audio time, EEG time) pairs used to map the audio clock."""

    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(a), float(e)) for a, e in self.pairs)
        if not pairs:
            raise InputError("sync needs at least one pair")
        audio = [a for a, _ in pairs]
        if any(b <= a for a, b in zip(audio, audio[1:])):
            raise NonMonotonicTimestamps("sync audio times must be strictly increasing")
        object.__setattr__(self, "pairs", pairs)


@dataclass(frozen=True, eq=False)
class PredictionTrace:
    """Continuous classifier output; tick ``k`` is at ``t0_s + k / rate_hz``."""

    values: np.ndarray
    t0_s: float
    rate_hz: float = 50.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(v)):
            raise InputError("trace values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.values.size) / self.rate_hz

    def __eq__(self, other):
        if not isinstance(other, PredictionTrace):
            return NotImplemented
        return (self.t0_s == other.t0_s and self.rate_hz == other.rate_hz
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class Session:
    data: SessionData
    events: tuple[EventRecord, ...] = ()
    transcript: tuple[TranscriptWord, ...] = ()
    rounds: tuple[RoundSpec, ...] = ()
    sync: SyncPairs | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(_check_events(self.events)))
        object.__setattr__(self, "transcript", tuple(_sort_words(self.transcript)))
        object.__setattr__(self, "rounds", tuple(_check_rounds(self.rounds)))

    @property
    def header(self) -> SessionHeader:
        return self.data.header


# --------------------------------------------------------------------------
# validation helpers

def _check_events(events: Iterable[EventRecord]) -> list[EventRecord]:
    events = list(events)
    for i in range(1, len(events)):
        if events[i].t_s < events[i - 1].t_s:
            raise NonMonotonicTimestamps(
                f"event {i} at {events[i].t_s} s precedes event {i - 1} at {events[i - 1].t_s} s")
    return events


def _sort_words(words: Iterable[TranscriptWord]) -> list[TranscriptWord]:
    return sorted(words, key=lambda w: w.onset_s)


def _check_rounds(rounds: Iterable[RoundSpec]) -> list[RoundSpec]:
    rounds = list(rounds)
    for prev, cur in zip(rounds, rounds[1:]):
        if cur.round <= prev.round:
            raise NonMonotonicTimestamps(
                f"round indices must increase strictly ({prev.round} then {cur.round})")
        if cur.start_s < prev.end_s:
            raise OverlappingRounds(
                f"round {cur.round} starts at {cur.start_s} s before round {prev.round} ends "
                f"at {prev.end_s} s")
    return rounds


# --------------------------------------------------------------------------
# sidecar readers

def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(f"missing file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _json_lines(path: Path):
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON in {path.name}: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise MalformedRecord(f"expected a JSON object in {path.name}", lineno)
        yield lineno, obj


def _number(obj, key, lineno=None):
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise MalformedRecord(f"field {key!r} must be a number, got {val!r}", lineno)
    return float(val)


def load_events(path) -> list[EventRecord]:
    events = []
    for lineno, obj in _json_lines(Path(path)):
        label = obj.get("label")
        meta = obj.get("meta", {})
        if not isinstance(label, str):
            raise MalformedRecord("field 'label' must be a string", lineno)
        if not isinstance(meta, dict):
            raise MalformedRecord("field 'meta' must be an object", lineno)
        try:
            events.append(EventRecord(_number(obj, "t_s", lineno), label, meta))
        except MalformedRecord:
            raise
        except InputError as exc:
            raise MalformedRecord(str(exc), lineno) from None
        if len(events) > 1 and events[-1].t_s < events[-2].t_s:
            raise NonMonotonicTimestamps(f"line {lineno}: events not sorted by t_s")
    return events


def load_transcript(path) -> list[TranscriptWord]:
    """Read word-level timestamps (audio clock), sorted by onset."""
    words = []
    for lineno, obj in _json_lines(Path(path)):
        word = obj.get("word")
        if not isinstance(word, str):
            raise MalformedRecord("field 'word' must be a string", lineno)
        try:
            words.append(TranscriptWord(word, _number(obj, "onset_s", lineno),
                                        _number(obj, "offset_s", lineno), obj.get("speaker")))
        except MalformedRecord:
            raise
        except InputError as exc:
            raise MalformedRecord(str(exc), lineno) from None
    return _sort_words(words)


def load_rounds(path) -> list[RoundSpec]:
    path = Path(path)
    try:
        items = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON in {path.name}: {exc.msg}") from None
    if not isinstance(items, list):
        raise MalformedRecord(f"{path.name} must contain a JSON list")
    rounds = []
    for i, obj in enumerate(items):
        if not isinstance(obj, dict):
            raise MalformedRecord(f"round record {i} is not an object")
        idx = obj.get("round")
        if isinstance(idx, bool) or not isinstance(idx, int) or idx < 1:
            raise MalformedRecord(f"round record {i}: 'round' must be a positive integer")
        try:
            rounds.append(RoundSpec(idx, _number(obj, "start_s"), _number(obj, "end_s")))
        except InputError as exc:
            raise MalformedRecord(f"round record {i}: {exc}") from None
    rounds.sort(key=lambda r: r.round)
    return _check_rounds(rounds)


def load_sync(path) -> SyncPairs:
    path = Path(path)
    try:
        obj = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON in {path.name}: {exc.msg}") from None
    pairs = obj.get("pairs") if isinstance(obj, dict) else None
    if not isinstance(pairs, list) or not pairs:
        raise MalformedRecord(f"{path.name} must contain a non-empty 'pairs' list")
    out = []
    for i, p in enumerate(pairs):
        if (not isinstance(p, list) or len(p) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)):
            raise MalformedRecord(f"sync pair {i} must be [audio_t, eeg_t]")
        out.append((float(p[0]), float(p[1])))
    return SyncPairs(tuple(out))


# --------------------------------------------------------------------------
# writers

def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _dump_lines(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


def save_events(events: Sequence[EventRecord], path) -> None:
    _write_text(Path(path), _dump_lines(
        {"t_s": e.t_s, "label": e.label, "meta": dict(e.meta)} for e in events))


def save_transcript(words: Sequence[TranscriptWord], path) -> None:
    _write_text(Path(path), _dump_lines(
        {"word": w.word, "onset_s": w.onset_s, "offset_s": w.offset_s, "speaker": w.speaker}
        for w in words))


def save_rounds(rounds: Sequence[RoundSpec], path) -> None:
    _write_text(Path(path), json.dumps(
        [{"round": r.round, "start_s": r.start_s, "end_s": r.end_s} for r in rounds], indent=1))


def save_sync(sync: SyncPairs, path) -> None:
    _write_text(Path(path), json.dumps({"pairs": [list(p) for p in sync.pairs]}))


def save_session(session: Session, dir_path) -> None:
    """Write ``session`` as a bundle directory.

    Sidecars are written only when non-empty. Stale sidecars left in the
    directory by an earlier save are removed so that ``load_session`` returns
    exactly what was saved.
    """
    d = Path(dir_path)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {d}: {exc}") from exc
    h = session.header
    header = {
        "version": h.version,
        "sample_rate_hz": float(h.sample_rate_hz),
        "channels": list(h.channels),
        "start_time_s": float(h.start_time_s),
        "data_file": DATA_FILE,
        "units": h.units,
        "n_frames": session.data.n_frames,
    }
    _write_text(d / SESSION_FILE, json.dumps(header, indent=1) + "\n")
    raw = np.ascontiguousarray(session.data.samples.T, dtype=_RAW_DTYPE)
    try:
        (d / DATA_FILE).write_bytes(raw.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {d / DATA_FILE}: {exc}") from exc

    sidecars = [
        (EVENTS_FILE, session.events, save_events),
        (TRANSCRIPT_FILE, session.transcript, save_transcript),
        (ROUNDS_FILE, session.rounds, save_rounds),
        (SYNC_FILE, session.sync, save_sync),
    ]
    for name, value, writer in sidecars:
        path = d / name
        if value:
            writer(value, path)
        elif path.exists():
            try:
                os.remove(path)
            except OSError as exc:
                raise IoFailure(f"cannot remove stale {path}: {exc}") from exc


def _parse_header(obj) -> tuple[SessionHeader, str, int | None]:
    if not isinstance(obj, dict):
        raise MalformedHeader("session.json must contain an object")
    missing = [k for k in ("sample_rate_hz", "channels", "data_file") if k not in obj]
    if missing:
        raise MalformedHeader(f"session.json lacks {', '.join(missing)}")
    version = obj.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported format version {version!r}")
    channels = obj["channels"]
    if not isinstance(channels, list):
        raise MalformedHeader("'channels' must be a list")
    data_file = obj["data_file"]
    if not isinstance(data_file, str) or not data_file:
        raise MalformedHeader("'data_file' must be a file name")
    start = obj.get("start_time_s", 0.0)
    rate = obj["sample_rate_hz"]
    if isinstance(rate, bool) or not isinstance(rate, (int, float)):
        raise MalformedHeader("'sample_rate_hz' must be a number")
    if isinstance(start, bool) or not isinstance(start, (int, float)):
        raise MalformedHeader("'start_time_s' must be a number")
    n_frames = obj.get("n_frames")
    if n_frames is not None and (isinstance(n_frames, bool) or not isinstance(n_frames, int)
                                 or n_frames < 0):
        raise MalformedHeader("'n_frames' must be a non-negative integer")
    header = SessionHeader(float(rate), tuple(channels), float(start), version,
                           obj.get("units", UNITS))
    return header, data_file, n_frames


def load_session(dir_path) -> Session:
    """Load and validate a session bundle directory.

    Raises
    ------
    MissingFile
        ``session.json`` or the raw data file is absent.
    MalformedHeader
        The header is unreadable or violates its invariants.
    SampleCountMismatch
        The raw byte length is not a multiple of ``channels * 4``, or disagrees
        with the optional ``n_frames`` header field.
    NonFiniteSample
        A sample is NaN or infinite.
    """
    d = Path(dir_path)
    try:
        header_obj = json.loads(_read_text(d / SESSION_FILE))
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"session.json is not valid JSON: {exc.msg}") from None
    header, data_file, n_frames = _parse_header(header_obj)
    raw_path = d / data_file
    try:
        raw = raw_path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"missing raw data file: {raw_path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {raw_path}: {exc}") from exc
    frame_bytes = header.n_channels * _RAW_DTYPE.itemsize
    if len(raw) % frame_bytes:
        raise SampleCountMismatch(
            f"{raw_path.name} holds {len(raw)} bytes, not a multiple of "
            f"{header.n_channels} channels x 4 bytes")
    if n_frames is not None and len(raw) != n_frames * frame_bytes:
        raise SampleCountMismatch(
            f"{raw_path.name} holds {len(raw) // frame_bytes} frames, header declares {n_frames}")
    samples = np.frombuffer(raw, dtype=_RAW_DTYPE).reshape(-1, header.n_channels).T
    data = SessionData(header, samples.astype(np.float32))

    def optional(name, loader, empty):
        path = d / name
        return loader(path) if path.exists() else empty

    return Session(
        data,
        events=tuple(optional(EVENTS_FILE, load_events, [])),
        transcript=tuple(optional(TRANSCRIPT_FILE, load_transcript, [])),
        rounds=tuple(optional(ROUNDS_FILE, load_rounds, [])),
        sync=optional(SYNC_FILE, load_sync, None),
    )
