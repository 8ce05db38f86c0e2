"""Sliding-window segmentation, subject-disjoint splits, and a synthetic
corpus generator used for desk-scale end-to-end testing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import DatasetManifest, FrameLabelSeq, PauseEvent, PauseType, RecordingMeta, encode_labels
from .features import FeatureMatrix
from .protocol import RATE_HZ, WINDOW_S

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class Window:
    recording_id: str
    start_s: float
    length_s: float = WINDOW_S

    @property
    def start_frame(self) -> int:
        return int(round(self.start_s * RATE_HZ))

    @property
    def end_frame(self) -> int:
        return self.start_frame + int(round(self.length_s * RATE_HZ))


def segment_windows(meta: RecordingMeta, stride_s: float = 1.0) -> list[Window]:
    """Window starts at 0, stride, 2*stride, ... while start + 15 <= duration.

    Recordings shorter than one window yield an empty list (with a warning,
    since such recordings are dropped from training corpora).
    """
    if stride_s <= 0:
        raise ValueError("stride_s must be positive")
    if meta.duration_s < WINDOW_S:
        warnings.warn(f"recording {meta.id} shorter than {WINDOW_S} s; no windows", stacklevel=2)
        return []
    # tiny slack so durations like 17.0 stored as 16.999999999 still count
    n = int(np.floor((meta.duration_s - WINDOW_S) / stride_s + 1e-9)) + 1
    return [Window(meta.id, i * stride_s) for i in range(n)]


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float]
    seed: int
    assignment: dict[str, str]
    shares: dict[str, float]
    balanced: bool

    def subjects_in(self, split: str) -> set[str]:
        return {s for s, name in self.assignment.items() if name == split}


def split_by_subject(manifest: DatasetManifest, fractions=(0.70, 0.15, 0.15), seed: int = 0) -> SplitSpec:
    """Greedy duration-balanced, subject-disjoint assignment.

    Subjects are taken largest-duration-first (seeded shuffle breaks
    duration ties) and each goes to the split with the largest remaining
    duration deficit; deficit ties resolve train > val > test. The
    balanced flag reports whether every split share lands within 5
    percentage points of its target.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or any(f <= 0 for f in fractions):
        raise ValueError(f"fractions must be 3 positive values summing to 1, got {fractions}")
    durations = manifest.subjects()
    if len(durations) < len(SPLIT_NAMES):
        raise ValueError(f"need at least {len(SPLIT_NAMES)} subjects, got {len(durations)}")
    rng = np.random.default_rng(seed)
    subjects = sorted(durations)
    priority = rng.permutation(len(subjects))
    order = sorted(range(len(subjects)), key=lambda i: (-durations[subjects[i]], priority[i]))

    total = sum(durations.values())
    targets = {name: frac * total for name, frac in zip(SPLIT_NAMES, fractions)}
    assigned = {name: 0.0 for name in SPLIT_NAMES}
    assignment: dict[str, str] = {}
    rank = {name: i for i, name in enumerate(SPLIT_NAMES)}
    for i in order:
        subj = subjects[i]
        pick = max(SPLIT_NAMES, key=lambda name: (targets[name] - assigned[name], -rank[name]))
        assignment[subj] = pick
        assigned[pick] += durations[subj]

    shares = {name: assigned[name] / total for name in SPLIT_NAMES}
    balanced = all(abs(shares[name] - frac) <= 0.05 for name, frac in zip(SPLIT_NAMES, fractions))
    return SplitSpec(fractions, seed, assignment, shares, balanced)


def split_records(manifest: DatasetManifest, spec: SplitSpec) -> dict[str, list]:
    out: dict[str, list] = {name: [] for name in SPLIT_NAMES}
    for rec in manifest.records:
        out[spec.assignment[rec.meta.subject_id]].append(rec)
    return out


DEFAULT_DENSITIES = {"S": 4.0, "B": 3.0, "BS": 2.0}  # events per minute
DEFAULT_DURATION_RANGES_S = {"S": (0.2, 0.8), "B": (0.2, 0.6), "BS": (0.5, 2.0)}


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic recording generator settings.

    Feature layout: columns 1-3 get +margin on frames of that class,
    column 0 gets +margin on any pause frame, column 4 carries a
    constant exertion offset of margin * (level - 3) / 4; everything
    else is Gaussian noise. margin defaults to 10 * noise, which makes
    single-column thresholding ~99.99% accurate.
    """

    densities: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DENSITIES))
    noise: float = 0.1
    margin: float | None = None
    dims: int = 40
    min_gap_frames: int = 15
    duration_ranges_s: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_DURATION_RANGES_S)
    )

    def resolved_margin(self) -> float:
        return 10.0 * self.noise if self.margin is None else self.margin

    def __post_init__(self):
        if any(d < 0 for d in self.densities.values()):
            raise ValueError("densities must be >= 0")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.dims < 5:
            raise ValueError("need at least 5 feature columns")
        if self.min_gap_frames < 1:
            raise ValueError("min_gap_frames must be >= 1")


def _sample_events(cfg: SynthConfig, T: int, rng: np.random.Generator) -> list[PauseEvent]:
    # counts: round(expected) with +-1 jitter, never negative
    lengths: list[int] = []
    types: list[PauseType] = []
    for name in ("S", "B", "BS"):
        density = cfg.densities.get(name, 0.0)
        expected = density * (T / RATE_HZ) / 60.0
        count = max(0, int(round(expected)) + int(rng.integers(-1, 2))) if density > 0 else 0
        lo_s, hi_s = cfg.duration_ranges_s[name]
        lo, hi = int(round(lo_s * RATE_HZ)), int(round(hi_s * RATE_HZ))
        for _ in range(count):
            lengths.append(int(rng.integers(lo, hi + 1)))
            types.append(PauseType.from_name(name))
    if not lengths:
        return []
    order = rng.permutation(len(lengths))
    lengths = [lengths[i] for i in order]
    types = [types[i] for i in order]
    n = len(lengths)
    slack = T - sum(lengths) - cfg.min_gap_frames * (n + 1)
    if slack < 0:
        raise ValueError(
            f"cannot fit {n} events totalling {sum(lengths)} frames into {T} frames "
            f"with gaps of {cfg.min_gap_frames}"
        )
    extra = rng.multinomial(slack, np.full(n + 1, 1.0 / (n + 1)))
    events = []
    pos = 0
    for i in range(n):
        pos += cfg.min_gap_frames + int(extra[i])
        events.append(PauseEvent(pos, pos + lengths[i], types[i]))
        pos += lengths[i]
    return events


def synth_generate(
    cfg: SynthConfig,
    T: int,
    seed: int,
    recording_id: str = "synth-0",
    subject_id: str = "subj-0",
    exertion_level: int = 3,
    task: str = "spontaneous",
):
    """Generate one synthetic recording: (features, labels, meta).

    Same inputs give bit-identical outputs. Events never touch each
    other or the clip edges (gaps of at least min_gap_frames), and
    their durations stay inside the configured per-type ranges.
    """
    if T < 50:
        raise ValueError("T must be >= 50")
    rng = np.random.default_rng(seed)
    events = _sample_events(cfg, T, rng)
    labels = encode_labels(events, T)

    margin = cfg.resolved_margin()
    data = rng.normal(0.0, cfg.noise, size=(T, cfg.dims))
    codes = labels.labels
    data[:, 0] += margin * (codes != 0)
    for c in (1, 2, 3):
        data[:, c] += margin * (codes == c)
    data[:, 4] += margin * (exertion_level - 3) / 4.0

    meta = RecordingMeta(
        id=recording_id,
        subject_id=subject_id,
        duration_s=T / RATE_HZ,
        exertion_level=exertion_level,
        task=task,
    )
    return FeatureMatrix(data, "mfb"), labels, meta


def synth_embedding(labels: FrameLabelSeq, seed: int, dims: int = 768, kind: str = "emb12",
                    noise: float = 0.1, margin: float | None = None) -> FeatureMatrix:
    """Synthetic embedding matrix: class indicators on columns 0-3 plus
    noise, mirroring the acoustic layout at embedding width."""
    rng = np.random.default_rng(seed)
    m = 10.0 * noise if margin is None else margin
    data = rng.normal(0.0, noise, size=(len(labels), dims))
    codes = labels.labels
    data[:, 0] += m * (codes != 0)
    for c in (1, 2, 3):
        data[:, c] += m * (codes == c)
    return FeatureMatrix(data, kind)


def window_frame_slice(window: Window, frames: int) -> slice:
    """Frame range of a window, validated against the recording length."""
    if window.end_frame > frames:
        raise ValueError(
            f"window [{window.start_frame}, {window.end_frame}) exceeds {frames} frames"
        )
    return slice(window.start_frame, window.end_frame)
