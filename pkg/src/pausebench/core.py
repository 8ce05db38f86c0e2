"""Canonical data types: frame labels, pause events, recordings, manifests.

The frame grid is 50 Hz throughout. A pause event is a maximal contiguous
run of one non-O label; encode/decode between event lists and frame label
sequences round-trips for non-overlapping inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .protocol import RATE_HZ


class PauseType(IntEnum):
    """Frame label codes: O (no pause), semantic, breathing, combined."""

    O = 0
    S = 1
    B = 2
    BS = 3

    @classmethod
    def from_name(cls, name: str) -> "PauseType":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown pause type name {name!r}") from None


PAUSE_TYPES = (PauseType.S, PauseType.B, PauseType.BS)
N_CLASSES = 4


@dataclass(frozen=True, eq=False)
class FrameLabelSeq:
    """Per-frame pause labels at a fixed frame rate.

    labels holds integer codes in {0,1,2,3}; length is the frame count T.
    """

    labels: np.ndarray
    rate_hz: int = RATE_HZ

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D sequence")
        if labels.min() < 0 or labels.max() > 3:
            bad = labels[(labels < 0) | (labels > 3)][0]
            raise ValueError(f"label code {bad} outside {{0,1,2,3}}")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def frames(self) -> int:
        return int(self.labels.size)

    @property
    def duration_s(self) -> float:
        return self.labels.size / self.rate_hz


@dataclass(frozen=True)
class PauseEvent:
    """One contiguous pause: [onset, offset) in frames, type in {S, B, BS}."""

    onset: int
    offset: int
    ptype: PauseType

    def __post_init__(self):
        if not 0 <= self.onset < self.offset:
            raise ValueError(f"invalid event bounds [{self.onset}, {self.offset})")
        ptype = PauseType(self.ptype)
        if ptype == PauseType.O:
            raise ValueError("events must have a non-O pause type")
        object.__setattr__(self, "ptype", ptype)

    @property
    def frames(self) -> int:
        return self.offset - self.onset

    def duration_s(self, rate_hz: int = RATE_HZ) -> float:
        return self.frames / rate_hz


class OverlapError(ValueError):
    """Two events overlap; rasterization refuses to pick a winner."""

    def __init__(self, first: PauseEvent, second: PauseEvent):
        self.first = first
        self.second = second
        super().__init__(f"overlapping events: {first} and {second}")


def encode_labels(events: list[PauseEvent], T: int, rate_hz: int = RATE_HZ) -> FrameLabelSeq:
    """Rasterize non-overlapping events into a frame label sequence of length T.

    Frames inside each event carry its type code; all others are O.
    Adjacent events (offset == next onset) are legal; overlaps are not.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    for ev in events:
        if ev.offset > T:
            raise ValueError(f"event {ev} outside frame range [0, {T})")
    ordered = sorted(events, key=lambda e: (e.onset, e.offset))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.onset < prev.offset:
            raise OverlapError(prev, cur)
    labels = np.zeros(T, dtype=np.int64)
    for ev in ordered:
        labels[ev.onset:ev.offset] = int(ev.ptype)
    return FrameLabelSeq(labels, rate_hz)


def decode_events(seq: FrameLabelSeq) -> list[PauseEvent]:
    """Extract maximal runs of identical non-zero labels, sorted by onset.

    A label change inside a non-zero stretch splits it into separate events.
    """
    labels = seq.labels
    boundaries = np.flatnonzero(np.diff(labels) != 0) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [labels.size]))
    events = []
    for start, end in zip(starts, ends):
        code = int(labels[start])
        if code != 0:
            events.append(PauseEvent(int(start), int(end), PauseType(code)))
    return events


VALID_TASKS = ("reading", "spontaneous")


@dataclass(frozen=True)
class RecordingMeta:
    """Metadata for one recording."""

    id: str
    subject_id: str
    duration_s: float
    exertion_level: int
    task: str

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if not 1 <= self.exertion_level <= 5:
            raise ValueError(f"exertion_level must be in [1,5], got {self.exertion_level}")
        if self.task not in VALID_TASKS:
            raise ValueError(f"task must be one of {VALID_TASKS}, got {self.task!r}")

    @property
    def frames(self) -> int:
        return int(round(self.duration_s * RATE_HZ))


@dataclass(frozen=True)
class ManifestRecord:
    """One manifest entry: metadata plus file paths (relative to the root)."""

    meta: RecordingMeta
    audio: str | None = None
    labels: str | None = None
    features: dict[str, str] = field(default_factory=dict)
    embeddings: dict[str, str] = field(default_factory=dict)

    def paths(self) -> list[str]:
        out = []
        if self.audio:
            out.append(self.audio)
        if self.labels:
            out.append(self.labels)
        out.extend(self.features.values())
        out.extend(self.embeddings.values())
        return out


@dataclass
class DatasetManifest:
    """Single JSON index of a corpus: one record per recording."""

    root: Path
    records: list[ManifestRecord]

    def __post_init__(self):
        self.root = Path(self.root)
        ids = [r.meta.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate recording ids in manifest: {dupes}")

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self, recording_id: str) -> ManifestRecord:
        for rec in self.records:
            if rec.meta.id == recording_id:
                return rec
        raise KeyError(recording_id)

    def resolve(self, rel_path: str) -> Path:
        return self.root / rel_path

    def subjects(self) -> dict[str, float]:
        """Total duration in seconds per subject."""
        totals: dict[str, float] = {}
        for rec in self.records:
            totals[rec.meta.subject_id] = totals.get(rec.meta.subject_id, 0.0) + rec.meta.duration_s
        return totals


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    records = []
    for rec in manifest.records:
        m = rec.meta
        records.append({
            "id": m.id,
            "subject_id": m.subject_id,
            "duration_s": m.duration_s,
            "exertion_level": m.exertion_level,
            "task": m.task,
            "audio": rec.audio,
            "labels": rec.labels,
            "features": rec.features,
            "embeddings": rec.embeddings,
        })
    Path(path).write_text(json.dumps({"records": records}, indent=2) + "\n")


def load_manifest(path: str | Path, check_files: bool = True) -> DatasetManifest:
    """Load a manifest; by default verify every referenced file exists."""
    path = Path(path)
    doc = json.loads(path.read_text())
    records = []
    for entry in doc["records"]:
        meta = RecordingMeta(
            id=entry["id"],
            subject_id=entry["subject_id"],
            duration_s=float(entry["duration_s"]),
            exertion_level=int(entry["exertion_level"]),
            task=entry["task"],
        )
        records.append(ManifestRecord(
            meta=meta,
            audio=entry.get("audio"),
            labels=entry.get("labels"),
            features=dict(entry.get("features") or {}),
            embeddings=dict(entry.get("embeddings") or {}),
        ))
    manifest = DatasetManifest(root=path.parent, records=records)
    if check_files:
        missing = []
        for rec in manifest.records:
            for rel in rec.paths():
                if not manifest.resolve(rel).exists():
                    missing.append(f"{rec.meta.id}: {rel}")
        if missing:
            raise FileNotFoundError("manifest references missing files: " + ", ".join(missing))
    return manifest


def save_labels(path: str | Path, seq: FrameLabelSeq, extra: dict | None = None) -> None:
    """Write a label file: {"rate_hz", "labels"} plus any extra keys."""
    doc = {"rate_hz": seq.rate_hz, "labels": [int(v) for v in seq.labels]}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc) + "\n")


def load_labels(path: str | Path) -> FrameLabelSeq:
    seq, _ = load_labels_with_meta(path)
    return seq


def load_labels_with_meta(path: str | Path) -> tuple[FrameLabelSeq, dict]:
    """Load a label file, returning the sequence and any extra keys."""
    doc = json.loads(Path(path).read_text())
    seq = FrameLabelSeq(np.asarray(doc["labels"], dtype=np.int64), int(doc["rate_hz"]))
    extra = {k: v for k, v in doc.items() if k not in ("rate_hz", "labels")}
    return seq, extra


def save_events(path: str | Path, events: list[PauseEvent], rate_hz: int = RATE_HZ) -> None:
    """Write events as a JSON list of {"onset_s", "offset_s", "type"}."""
    doc = [
        {"onset_s": ev.onset / rate_hz, "offset_s": ev.offset / rate_hz, "type": ev.ptype.name}
        for ev in events
    ]
    Path(path).write_text(json.dumps(doc) + "\n")


def load_events(path: str | Path, rate_hz: int = RATE_HZ) -> list[PauseEvent]:
    doc = json.loads(Path(path).read_text())
    return [
        PauseEvent(
            onset=int(round(entry["onset_s"] * rate_hz)),
            offset=int(round(entry["offset_s"] * rate_hz)),
            ptype=PauseType.from_name(entry["type"]),
        )
        for entry in doc
    ]
