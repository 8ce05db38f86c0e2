"""Event-based scoring: one-to-one matching under boundary tolerance and
overlap constraints, per-type and overall accuracy, and a brute-force
matching oracle used to validate the greedy matcher.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import PauseEvent, PauseType
from .protocol import MIN_OVERLAP_RATIO, TOLERANCE_FRAMES

ORACLE_MAX_EVENTS = 10


@dataclass(frozen=True)
class MatchConfig:
    """Matching constraints.

    require_both_boundaries=True demands onset AND offset within
    tolerance; False accepts either. The overlap floor is relative to
    the ground-truth event duration and always applies.
    """

    tolerance_frames: int = TOLERANCE_FRAMES
    min_overlap_ratio: float = MIN_OVERLAP_RATIO
    require_both_boundaries: bool = True

    def __post_init__(self):
        if self.tolerance_frames < 0:
            raise ValueError("tolerance_frames must be >= 0")
        if not 0 < self.min_overlap_ratio <= 1:
            raise ValueError("min_overlap_ratio must be in (0, 1]")


@dataclass
class MatchResult:
    pairs: list[tuple[PauseEvent, PauseEvent, bool]] = field(default_factory=list)
    unmatched_gt: list[PauseEvent] = field(default_factory=list)
    unmatched_pred: list[PauseEvent] = field(default_factory=list)

    @property
    def agree_count(self) -> int:
        return sum(1 for _, _, agree in self.pairs if agree)


def overlap_frames(a: PauseEvent, b: PauseEvent) -> int:
    return max(0, min(a.offset, b.offset) - max(a.onset, b.onset))


def _feasible(gt: PauseEvent, pred: PauseEvent, cfg: MatchConfig) -> bool:
    don = abs(pred.onset - gt.onset)
    doff = abs(pred.offset - gt.offset)
    if cfg.require_both_boundaries:
        if don > cfg.tolerance_frames or doff > cfg.tolerance_frames:
            return False
    else:
        if don > cfg.tolerance_frames and doff > cfg.tolerance_frames:
            return False
    return overlap_frames(gt, pred) >= cfg.min_overlap_ratio * gt.frames


def greedy_match(gt: list[PauseEvent], pred: list[PauseEvent], cfg: MatchConfig = MatchConfig()) -> MatchResult:
    """One-to-one greedy matching.

    Candidate pairs satisfy the boundary tolerance and the overlap floor;
    they are consumed in order of (label agreement first, smaller total
    boundary distance, larger overlap), with event indices as the final
    deterministic tie-break.
    """
    candidates = []
    for i, g in enumerate(gt):
        for j, p in enumerate(pred):
            if _feasible(g, p, cfg):
                agree = g.ptype == p.ptype
                dist = abs(p.onset - g.onset) + abs(p.offset - g.offset)
                candidates.append((not agree, dist, -overlap_frames(g, p), i, j))
    candidates.sort()
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    result = MatchResult()
    for disagree, _, _, i, j in candidates:
        if i in used_gt or j in used_pred:
            continue
        used_gt.add(i)
        used_pred.add(j)
        result.pairs.append((gt[i], pred[j], not disagree))
    result.unmatched_gt = [g for i, g in enumerate(gt) if i not in used_gt]
    result.unmatched_pred = [p for j, p in enumerate(pred) if j not in used_pred]
    return result


def oracle_match(gt: list[PauseEvent], pred: list[PauseEvent], cfg: MatchConfig = MatchConfig()) -> MatchResult:
    """Exhaustive one-to-one matching maximizing, in order: number of
    label-agreeing pairs, total pairs, negated total boundary distance.

    Only for small instances; used to test the greedy matcher.
    """
    if len(gt) > ORACLE_MAX_EVENTS or len(pred) > ORACLE_MAX_EVENTS:
        raise ValueError(f"oracle limited to {ORACLE_MAX_EVENTS} events per side")
    feasible: list[list[int]] = []
    for g in gt:
        feasible.append([j for j, p in enumerate(pred) if _feasible(g, p, cfg)])

    best_score = (-1, -1, 0)
    best_assign: dict[int, int] = {}

    def dfs(i: int, used: set[int], assign: dict[int, int], agree: int, dist: int):
        nonlocal best_score, best_assign
        if i == len(gt):
            score = (agree, len(assign), -dist)
            if score > best_score:
                best_score = score
                best_assign = dict(assign)
            return
        # even pairing every remaining gt with agreement cannot beat best
        if (agree + (len(gt) - i), len(assign) + (len(gt) - i), 0) < best_score:
            return
        for j in feasible[i]:
            if j in used:
                continue
            p = pred[j]
            g = gt[i]
            d = abs(p.onset - g.onset) + abs(p.offset - g.offset)
            used.add(j)
            assign[i] = j
            dfs(i + 1, used, assign, agree + (g.ptype == p.ptype), dist + d)
            used.discard(j)
            del assign[i]
        dfs(i + 1, used, assign, agree, dist)

    dfs(0, set(), {}, 0, 0)
    result = MatchResult()
    for i, j in sorted(best_assign.items()):
        result.pairs.append((gt[i], pred[j], gt[i].ptype == pred[j].ptype))
    result.unmatched_gt = [g for i, g in enumerate(gt) if i not in best_assign]
    matched_pred = set(best_assign.values())
    result.unmatched_pred = [p for j, p in enumerate(pred) if j not in matched_pred]
    return result


def event_accuracy(result: MatchResult, gt: list[PauseEvent]) -> dict:
    """Recall-style accuracy over ground-truth events.

    Per type: label-agreeing pairs whose gt event has that type, divided
    by the number of gt events of that type; "n/a" when the denominator
    is zero. Overall: label-agreeing pairs / total gt events.
    """
    gt_counts = {t: 0 for t in ("S", "B", "BS")}
    for g in gt:
        gt_counts[g.ptype.name] += 1
    agree_counts = {t: 0 for t in ("S", "B", "BS")}
    for g, _, agree in result.pairs:
        if agree:
            agree_counts[g.ptype.name] += 1
    per_type = {
        t: (agree_counts[t] / gt_counts[t]) if gt_counts[t] else "n/a"
        for t in ("S", "B", "BS")
    }
    total = len(gt)
    overall = (sum(agree_counts.values()) / total) if total else "n/a"
    return {
        "per_type": per_type,
        "overall": overall,
        "counts": {
            "gt": gt_counts,
            "agree": agree_counts,
            "pairs": len(result.pairs),
            "pred": len(result.pairs) + len(result.unmatched_pred),
        },
    }


def frame_confusion(gt_labels, pred_labels, n_classes: int = 4):
    """Frame-wise confusion matrix (debug output, not a headline metric)."""
    import numpy as np

    gt_labels = np.asarray(gt_labels, dtype=np.int64).ravel()
    pred_labels = np.asarray(pred_labels, dtype=np.int64).ravel()
    if gt_labels.shape != pred_labels.shape:
        raise ValueError("label arrays must have equal length")
    mat = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(mat, (gt_labels, pred_labels), 1)
    return mat
