"""Turn raw frame-wise model outputs into cleaned event predictions.

Regression branch: lowpass filter -> threshold map -> merge low into high.
Classification branch: bridge zero gaps -> drop short runs -> majority-unify,
repeated to a fixpoint. Both branches end with tail masking before scoring.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .core import FrameLabelSeq, PauseEvent, decode_events
from .protocol import MASK_TAIL_FRAMES, RATE_HZ


@dataclass(frozen=True)
class PostprocConfig:
    """Knobs for both cleaning branches.

    thresholds None means: sweep them on validation data.
    """

    cutoff_hz: float = 0.05
    thresholds: tuple[float, float, float] | None = None
    sweep_step: float = 0.05
    merge_gap_frames: int = 5
    min_event_frames: int = 3
    bridge_gap_frames: int = 2
    mask_tail_frames: int = MASK_TAIL_FRAMES

    def __post_init__(self):
        if not 0 < self.cutoff_hz < 25:
            raise ValueError(f"cutoff_hz must be in (0, 25), got {self.cutoff_hz}")
        if self.thresholds is not None:
            _check_thresholds(self.thresholds)
        if self.sweep_step <= 0:
            raise ValueError("sweep_step must be positive")
        for name in ("merge_gap_frames", "min_event_frames", "bridge_gap_frames", "mask_tail_frames"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _check_thresholds(t) -> tuple[float, float, float]:
    t = tuple(float(v) for v in t)
    if len(t) != 3:
        raise ValueError(f"need exactly 3 thresholds, got {len(t)}")
    if not (0.0 <= t[0] < t[1] < t[2] <= 3.0):
        raise ValueError(f"thresholds must satisfy 0 <= t1 < t2 < t3 <= 3, got {t}")
    return t


def lowpass(seq: np.ndarray, cutoff_hz: float = 0.05, rate_hz: int = RATE_HZ) -> np.ndarray:
    """Zero-phase low-pass filter; no onset shift, DC preserved exactly.

    Fourth-order design run forward and backward with reflection padding.
    The mean is removed before filtering and restored after, so constant
    sequences pass through bit-exactly.
    """
    x = np.asarray(seq, dtype=np.float64)
    if x.ndim != 1 or x.size < 8:
        raise ValueError("need a 1-D sequence of at least 8 samples")
    if cutoff_hz >= rate_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz at or above Nyquist {rate_hz / 2} Hz")
    sos = butter(4, cutoff_hz, btype="low", fs=rate_hz, output="sos")
    mean = x.mean()
    y = sosfiltfilt(sos, x - mean, padtype="even", padlen=x.size - 1)
    return y + mean


def spectrum_profile(seqs: list[np.ndarray], rate_hz: int = RATE_HZ):
    """Average magnitude spectrum across sequences of equal length.

    Returns (freq_hz, magnitude); magnitudes are averaged per sequence,
    so the profile of a list is the mean of the individual profiles.
    """
    if not seqs:
        raise ValueError("need at least one sequence")
    arrs = [np.asarray(s, dtype=np.float64) for s in seqs]
    n = arrs[0].size
    if any(a.ndim != 1 or a.size != n for a in arrs):
        raise ValueError("all sequences must be 1-D with equal lengths")
    mags = np.mean([np.abs(np.fft.rfft(a)) for a in arrs], axis=0)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    return freqs, mags


def regression_to_classes(values: np.ndarray, thresholds, rate_hz: int = RATE_HZ) -> FrameLabelSeq:
    """Map real-valued frames to classes: label = #{thresholds below value}."""
    t1, t2, t3 = _check_thresholds(thresholds)
    values = np.asarray(values, dtype=np.float64)
    labels = (values > t1).astype(np.int64) + (values > t2) + (values > t3)
    return FrameLabelSeq(labels, rate_hz)


def merge_low_high(seq: FrameLabelSeq, merge_gap_frames: int = 5) -> FrameLabelSeq:
    """Absorb S runs into nearby higher-class (B/BS) runs.

    An S run whose immediately adjacent run on either side is B or BS
    with at most merge_gap_frames zero frames between takes that
    neighbor's label, gap frames included. When both neighbors qualify
    the nearer one wins; ties prefer the higher class, then the right
    neighbor. Decisions are made on the input run structure in one pass.
    Never decreases any frame's class code.
    """
    labels = seq.labels.copy()
    events = decode_events(seq)
    for i, ev in enumerate(events):
        if int(ev.ptype) != 1:
            continue
        candidates = []  # (gap, -label, side) with side 0 = right
        if i > 0 and events[i - 1].ptype >= 2:
            nb = events[i - 1]
            gap = ev.onset - nb.offset
            if gap <= merge_gap_frames:
                candidates.append(((gap, -int(nb.ptype), 1), nb))
        if i + 1 < len(events) and events[i + 1].ptype >= 2:
            nb = events[i + 1]
            gap = nb.onset - ev.offset
            if gap <= merge_gap_frames:
                candidates.append(((gap, -int(nb.ptype), 0), nb))
        if not candidates:
            continue
        nb = min(candidates)[1]
        if nb.offset <= ev.onset:
            labels[nb.offset:ev.offset] = int(nb.ptype)
        else:
            labels[ev.onset:nb.onset] = int(nb.ptype)
    return FrameLabelSeq(labels, seq.rate_hz)


def _bridge_gaps(labels: np.ndarray, bridge_gap_frames: int) -> np.ndarray:
    if bridge_gap_frames <= 0:
        return labels
    out = labels.copy()
    events = decode_events(FrameLabelSeq(labels))
    for prev, cur in zip(events, events[1:]):
        gap = cur.onset - prev.offset
        if 0 < gap <= bridge_gap_frames and prev.ptype == cur.ptype:
            if np.all(labels[prev.offset:cur.onset] == 0):
                out[prev.offset:cur.onset] = int(prev.ptype)
    return out


def _drop_short_runs(labels: np.ndarray, min_event_frames: int) -> np.ndarray:
    out = labels.copy()
    for ev in decode_events(FrameLabelSeq(labels)):
        if ev.frames < min_event_frames:
            out[ev.onset:ev.offset] = 0
    return out


def _unify_segments(labels: np.ndarray) -> np.ndarray:
    out = labels.copy()
    nz = labels != 0
    boundaries = np.flatnonzero(np.diff(nz.astype(np.int8))) + 1
    edges = np.concatenate(([0], boundaries, [labels.size]))
    for start, end in zip(edges, edges[1:]):
        if not nz[start]:
            continue
        counts = np.bincount(labels[start:end], minlength=4)
        # argmax over reversed order implements the BS > B > S tie rule
        winner = 3 - int(np.argmax(counts[:0:-1]))
        out[start:end] = winner
    return out


def clean_classification(seq: FrameLabelSeq, cfg: PostprocConfig = PostprocConfig()) -> FrameLabelSeq:
    """Bridge zero gaps between identical labels, drop runs shorter than
    the minimum, and unify each contiguous non-zero segment to its
    majority label (ties resolved toward the higher class).

    The three steps run in that order and repeat until nothing changes;
    a single sweep is not idempotent because unification can create new
    bridgeable gaps. Each sweep that changes anything reduces the run
    count, so the loop terminates.
    """
    labels = seq.labels
    while True:
        stepped = _bridge_gaps(labels, cfg.bridge_gap_frames)
        stepped = _drop_short_runs(stepped, cfg.min_event_frames)
        stepped = _unify_segments(stepped)
        if np.array_equal(stepped, labels):
            return FrameLabelSeq(stepped, seq.rate_hz)
        labels = stepped


def mask_tail(x, mask_tail_frames: int, T: int | None = None):
    """Exclude the final mask_tail_frames frames from evaluation.

    For a label sequence the tail is zeroed. For an event list, events
    fully inside the tail are dropped and straddling events truncated
    at T - mask_tail_frames. mask 0 is the identity.
    """
    if isinstance(x, FrameLabelSeq):
        T = len(x)
        if mask_tail_frames >= T:
            raise ValueError(f"mask {mask_tail_frames} >= sequence length {T}")
        if mask_tail_frames == 0:
            return x
        labels = x.labels.copy()
        labels[T - mask_tail_frames:] = 0
        return FrameLabelSeq(labels, x.rate_hz)
    if T is None:
        raise ValueError("T is required when masking an event list")
    if mask_tail_frames >= T:
        raise ValueError(f"mask {mask_tail_frames} >= T {T}")
    cut = T - mask_tail_frames
    out = []
    for ev in x:
        if ev.onset >= cut:
            continue
        if ev.offset > cut:
            ev = PauseEvent(ev.onset, cut, ev.ptype)
        out.append(ev)
    return out


def threshold_grid(step: float, lo: float = 0.0, hi: float = 3.0) -> list[tuple[float, float, float]]:
    """All ascending (t1, t2, t3) triples from the regular grid."""
    n = int(round((hi - lo) / step))
    points = [round(lo + i * step, 10) for i in range(n + 1)]
    return list(itertools.combinations(points, 3))


def sweep_thresholds(
    values_list: list[np.ndarray],
    gt_list: list[FrameLabelSeq],
    cfg: PostprocConfig,
    match_cfg=None,
) -> tuple[float, float, float]:
    """Pick the grid triple maximizing overall event accuracy on the
    given validation windows, running the full regression branch
    (threshold -> merge -> tail mask) per candidate.

    Ties go to the lexicographically smallest triple, so the result is
    a function of the inputs only.
    """
    from .evaluation import MatchConfig, event_accuracy, greedy_match

    if match_cfg is None:
        match_cfg = MatchConfig()
    if not values_list or len(values_list) != len(gt_list):
        raise ValueError("need matching non-empty values and ground-truth lists")
    gt_events = []
    total_gt = 0
    for gt in gt_list:
        evs = mask_tail(decode_events(gt), cfg.mask_tail_frames, len(gt))
        gt_events.append(evs)
        total_gt += len(evs)
    if total_gt == 0:
        raise ValueError("validation windows contain no ground-truth events")

    best = None
    for triple in threshold_grid(cfg.sweep_step):
        agree = 0
        for values, gt, evs in zip(values_list, gt_list, gt_events):
            seq = regression_to_classes(values, triple, gt.rate_hz)
            seq = merge_low_high(seq, cfg.merge_gap_frames)
            pred = mask_tail(decode_events(seq), cfg.mask_tail_frames, len(gt))
            result = greedy_match(evs, pred, match_cfg)
            agree += sum(1 for _, _, ok in result.pairs if ok)
        acc = agree / total_gt
        if best is None or acc > best[0]:
            best = (acc, triple)
    return best[1]
