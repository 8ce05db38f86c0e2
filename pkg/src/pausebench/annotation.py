"""Multi-annotator tracks, frame-wise majority merging, corpus statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DatasetManifest, FrameLabelSeq, decode_events

TIE_RULE = "BS>B>S>O"


@dataclass(frozen=True)
class AnnotationTrack:
    recording_id: str
    annotator_id: str
    seq: FrameLabelSeq


def majority_vote(tracks: list[AnnotationTrack] | list[FrameLabelSeq]) -> FrameLabelSeq:
    """Per-frame modal label across tracks.

    Ties break by fixed precedence BS > B > S > O, so a three-way split
    yields the rarer, more information-bearing class. Unanimous frames
    always keep their label; annotator order never matters.
    """
    seqs = [t.seq if isinstance(t, AnnotationTrack) else t for t in tracks]
    if len(seqs) < 2:
        raise ValueError("majority vote needs at least 2 tracks")
    recs = {t.recording_id for t in tracks if isinstance(t, AnnotationTrack)}
    if len(recs) > 1:
        raise ValueError(f"tracks span multiple recordings: {sorted(recs)}")
    T = len(seqs[0])
    if any(len(s) != T for s in seqs):
        raise ValueError("all tracks must have equal length")
    rate = seqs[0].rate_hz
    stack = np.stack([s.labels for s in seqs])
    counts = np.stack([(stack == c).sum(axis=0) for c in range(4)])
    # argmax over reversed class order makes higher codes win ties
    winners = 3 - np.argmax(counts[::-1], axis=0)
    return FrameLabelSeq(winners, rate)


def merged_label_doc(seq: FrameLabelSeq, annotators: list[str]) -> dict:
    """Label-file JSON body for a merged track, with merge metadata."""
    return {
        "rate_hz": seq.rate_hz,
        "labels": [int(v) for v in seq.labels],
        "merge": "majority",
        "tie_rule": TIE_RULE,
        "annotators": list(annotators),
    }


DURATION_BIN_S = 0.1


def _duration_histogram(durations: list[float]) -> dict:
    if not durations:
        return {"bin_edges_s": [], "counts": []}
    n_bins = int(np.ceil(max(durations) / DURATION_BIN_S + 1e-9))
    edges = np.round(np.arange(n_bins + 1) * DURATION_BIN_S, 10)
    counts, _ = np.histogram(durations, bins=edges)
    return {"bin_edges_s": edges.tolist(), "counts": counts.tolist()}


def corpus_stats(manifest: DatasetManifest, labels: dict[str, FrameLabelSeq],
                 assignment: dict[str, str] | None = None) -> dict:
    """Per-split exertion histogram, per-type event counts, and per-type
    event-duration histograms.

    labels maps recording id to its merged label sequence. assignment
    maps subject id to a split name; without it everything lands in one
    "all" split. Recordings with no labels are listed, not fatal.
    """
    splits: dict[str, dict] = {}
    missing: list[str] = []
    for rec in manifest.records:
        split = assignment.get(rec.meta.subject_id, "all") if assignment else "all"
        entry = splits.setdefault(split, {
            "recordings": 0,
            "total_duration_s": 0.0,
            "exertion_histogram": {str(k): 0 for k in range(1, 6)},
            "event_counts": {"S": 0, "B": 0, "BS": 0},
            "_durations": {"S": [], "B": [], "BS": []},
        })
        entry["recordings"] += 1
        entry["total_duration_s"] += rec.meta.duration_s
        entry["exertion_histogram"][str(rec.meta.exertion_level)] += 1
        seq = labels.get(rec.meta.id)
        if seq is None:
            missing.append(rec.meta.id)
            continue
        for ev in decode_events(seq):
            entry["event_counts"][ev.ptype.name] += 1
            entry["_durations"][ev.ptype.name].append(ev.duration_s(seq.rate_hz))
    for entry in splits.values():
        durations = entry.pop("_durations")
        entry["duration_histograms"] = {t: _duration_histogram(durations[t]) for t in ("S", "B", "BS")}
    return {"splits": splits, "missing_labels": sorted(missing)}
