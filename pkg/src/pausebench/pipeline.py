"""End-to-end runs: features -> (fuse / reweight) -> train -> predict ->
postprocess -> mask -> match -> report.

Setups share one code path: setup 1 trains on a single feature matrix,
setup 2 on the fused acoustic+embedding matrix, setup 3 on the fused
matrix re-weighted row-wise by a stage-1 pause detector. Per-stage RNG
seeds are derived independently from the top-level seed, so skipping or
stubbing one stage never shifts another stage's randomness.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DatasetManifest, FrameLabelSeq, decode_events, load_labels, load_manifest
from .dataprep import Window, segment_windows, split_by_subject, split_records, window_frame_slice
from .evaluation import MatchConfig, greedy_match
from .features import FeatureMatrix, load_matrix, resample_embedding
from .models import (Model, ModelConfig, TrainConfig, forward_batch, init_model,
                     reweight, save_checkpoint, stage1_detect, train)
from .postproc import (PostprocConfig, clean_classification, lowpass, mask_tail,
                       merge_low_high, regression_to_classes, sweep_thresholds)
from .protocol import protocol_constants

TASKS = ("classification", "regression")


class PipelineError(RuntimeError):
    """Raised when a pipeline stage fails; names the stage and record."""

    def __init__(self, stage: str, detail: str, record_id: str | None = None):
        self.stage = stage
        self.record_id = record_id
        where = f" (record {record_id})" if record_id else ""
        super().__init__(f"stage {stage!r} failed{where}: {detail}")


@dataclass(frozen=True)
class PipelineConfig:
    manifest: str
    setup: int = 1
    task: str = "classification"
    feature: str = "mfb"
    emb: str | None = None
    hidden_dim: int = 32
    n_layers: int = 2
    bidirectional: bool = True
    conv_kernel: int = 0
    conv_channels: int = 0
    batch_size: int = 64
    learning_rate: float = 1e-4
    max_epochs: int = 30
    patience: int = 5
    loss: dict | None = None  # None -> ce for classification, huber for regression
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    train_stride_s: float = 1.0
    test_stride_s: float = 15.0
    seed: int = 0
    postproc: PostprocConfig = field(default_factory=PostprocConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    detector: str = "train"  # "train" a stage-1 model, or "ones" for the identity stub
    detector_hidden: int = 128
    detector_layers: int = 2
    detector_epochs: int = 10
    out_dir: str | None = None

    def __post_init__(self):
        if self.setup not in (1, 2, 3):
            raise ValueError(f"setup must be 1, 2, or 3, got {self.setup}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.setup in (2, 3) and not self.emb:
            raise ValueError(f"setup {self.setup} needs an embedding kind")
        if self.detector not in ("train", "ones"):
            raise ValueError(f"detector must be 'train' or 'ones', got {self.detector!r}")

    def resolved_loss(self) -> dict:
        if self.loss is not None:
            return dict(self.loss)
        return {"loss": "ce"} if self.task == "classification" else {"loss": "huber"}

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["fractions"] = list(self.fractions)
        doc["postproc"] = dataclasses.asdict(self.postproc)
        if self.postproc.thresholds is not None:
            doc["postproc"]["thresholds"] = list(self.postproc.thresholds)
        doc["match"] = dataclasses.asdict(self.match)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        doc["fractions"] = tuple(doc.get("fractions", (0.70, 0.15, 0.15)))
        pp = dict(doc.get("postproc") or {})
        if pp.get("thresholds") is not None:
            pp["thresholds"] = tuple(pp["thresholds"])
        doc["postproc"] = PostprocConfig(**pp)
        doc["match"] = MatchConfig(**(doc.get("match") or {}))
        return cls(**doc)


def derive_seeds(seed: int) -> dict[str, int]:
    """Independent per-stage seeds from one top-level seed."""
    state = np.random.SeedSequence(seed).generate_state(4)
    names = ("split", "model", "train", "detector")
    return {name: int(v) for name, v in zip(names, state)}


@dataclass
class _Recording:
    meta: object
    labels: FrameLabelSeq
    acoustic: FeatureMatrix | None
    emb: FeatureMatrix | None
    windows: list[Window]


def _load_recordings(manifest: DatasetManifest, cfg: PipelineConfig,
                     records: list, stride_s: float) -> list[_Recording]:
    out = []
    for rec in records:
        rid = rec.meta.id
        try:
            frames = rec.meta.frames
            labels = load_labels(manifest.resolve(rec.labels))
            if len(labels) != frames:
                raise ValueError(f"labels have {len(labels)} frames, metadata implies {frames}")
            acoustic = emb = None
            if cfg.feature in rec.features:
                acoustic = load_matrix(manifest.resolve(rec.features[cfg.feature]))
            elif cfg.setup == 1 and cfg.feature in rec.embeddings:
                emb_raw = load_matrix(manifest.resolve(rec.embeddings[cfg.feature]))
                acoustic = resample_embedding(emb_raw, frames)
            else:
                raise ValueError(f"no {cfg.feature!r} feature available")
            if cfg.setup in (2, 3):
                if cfg.emb not in rec.embeddings:
                    raise ValueError(f"no {cfg.emb!r} embedding available")
                emb = resample_embedding(load_matrix(manifest.resolve(rec.embeddings[cfg.emb])), frames)
            if acoustic.frames != frames:
                raise ValueError(f"features have {acoustic.frames} frames, metadata implies {frames}")
            windows = segment_windows(rec.meta, stride_s)
            out.append(_Recording(rec.meta, labels, acoustic, emb, windows))
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError("load", str(e), rid) from e
    return out


def _window_inputs(cfg: PipelineConfig, rec: _Recording, detector: Model | None):
    """Per-window input matrices for the configured setup."""
    xs = []
    for w in rec.windows:
        sl = window_frame_slice(w, len(rec.labels))
        if cfg.setup == 1:
            xs.append(rec.acoustic.data[sl])
            continue
        a = FeatureMatrix(rec.acoustic.data[sl], rec.acoustic.kind)
        e = FeatureMatrix(rec.emb.data[sl], rec.emb.kind)
        if cfg.setup == 2:
            xs.append(np.concatenate([a.data, e.data], axis=1))
        else:
            if detector is None:
                omega = np.ones(a.frames)
            else:
                omega = stage1_detect(detector, a)
            xs.append(reweight(omega, a, e).data)
    return xs


def _targets(task: str, labels: np.ndarray) -> np.ndarray:
    if task == "classification":
        return labels.astype(np.int64)
    return labels.astype(np.float64)


def _assemble(cfg: PipelineConfig, recs: list[_Recording], detector: Model | None):
    """Stack window inputs/targets; returns (X, y, gt label windows)."""
    xs, ys, gts = [], [], []
    for rec in recs:
        try:
            inputs = _window_inputs(cfg, rec, detector)
        except Exception as e:
            raise PipelineError("assemble", str(e), rec.meta.id) from e
        for w, x in zip(rec.windows, inputs):
            sl = window_frame_slice(w, len(rec.labels))
            seq = FrameLabelSeq(rec.labels.labels[sl], rec.labels.rate_hz)
            xs.append(x)
            ys.append(_targets(cfg.task, seq.labels))
            gts.append(seq)
    if not xs:
        raise PipelineError("assemble", "no windows (all recordings too short?)")
    return np.stack(xs), np.stack(ys), gts


def _train_detector(cfg: PipelineConfig, train_recs, val_recs, seeds) -> Model:
    def binary_data(recs):
        xs, ys = [], []
        for rec in recs:
            for w in rec.windows:
                sl = window_frame_slice(w, len(rec.labels))
                xs.append(rec.acoustic.data[sl])
                ys.append((rec.labels.labels[sl] != 0).astype(np.float64))
        return np.stack(xs), np.stack(ys)

    X_train, y_train = binary_data(train_recs)
    X_val, y_val = binary_data(val_recs)
    mcfg = ModelConfig(
        input_dim=X_train.shape[2],
        hidden_dim=cfg.detector_hidden,
        n_layers=cfg.detector_layers,
        bidirectional=True,
        head="binary",
        seed=seeds["detector"],
    )
    tcfg = TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        max_epochs=cfg.detector_epochs,
        patience=cfg.patience,
        seed=seeds["detector"],
        loss={"loss": "bce"},
    )
    detector, _ = train(init_model(mcfg), (X_train, y_train), (X_val, y_val), tcfg)
    return detector


def _predict_labels(cfg: PipelineConfig, model: Model, X: np.ndarray,
                    thresholds) -> list[FrameLabelSeq]:
    """Model outputs to cleaned per-window label sequences."""
    preds = []
    for start in range(0, X.shape[0], cfg.batch_size):
        out, _ = forward_batch(model, X[start:start + cfg.batch_size])
        for row in out:
            if cfg.task == "classification":
                seq = FrameLabelSeq(np.argmax(row, axis=1))
                preds.append(clean_classification(seq, cfg.postproc))
            else:
                filtered = lowpass(row, cfg.postproc.cutoff_hz)
                seq = regression_to_classes(filtered, thresholds)
                preds.append(merge_low_high(seq, cfg.postproc.merge_gap_frames))
    return preds


def _score(cfg: PipelineConfig, preds: list[FrameLabelSeq], gts: list[FrameLabelSeq]) -> dict:
    gt_counts = {"S": 0, "B": 0, "BS": 0}
    agree_counts = {"S": 0, "B": 0, "BS": 0}
    n_pred_events = 0
    for pred, gt in zip(preds, gts):
        T = len(gt)
        pred_ev = mask_tail(decode_events(pred), cfg.postproc.mask_tail_frames, T)
        gt_ev = mask_tail(decode_events(gt), cfg.postproc.mask_tail_frames, T)
        n_pred_events += len(pred_ev)
        result = greedy_match(gt_ev, pred_ev, cfg.match)
        for g in gt_ev:
            gt_counts[g.ptype.name] += 1
        for g, _, agree in result.pairs:
            if agree:
                agree_counts[g.ptype.name] += 1
    total_gt = sum(gt_counts.values())
    per_type = {
        t: (agree_counts[t] / gt_counts[t]) if gt_counts[t] else "n/a"
        for t in ("S", "B", "BS")
    }
    overall = (sum(agree_counts.values()) / total_gt) if total_gt else "n/a"
    return {
        "per_type": per_type,
        "overall": overall,
        "counts": {"gt": gt_counts, "agree": agree_counts, "pred_events": n_pred_events},
    }


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute one full configuration and return its report:
    {"config": ..., "protocol": ..., "results": ...}.

    Same config in, same report out: all randomness flows from
    cfg.seed through per-stage derived seeds.
    """
    seeds = derive_seeds(cfg.seed)
    try:
        manifest = load_manifest(cfg.manifest)
    except Exception as e:
        raise PipelineError("manifest", str(e)) from e

    try:
        spec = split_by_subject(manifest, cfg.fractions, seeds["split"])
        by_split = split_records(manifest, spec)
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError("split", str(e)) from e

    train_recs = _load_recordings(manifest, cfg, by_split["train"], cfg.train_stride_s)
    val_recs = _load_recordings(manifest, cfg, by_split["val"], cfg.train_stride_s)
    test_recs = _load_recordings(manifest, cfg, by_split["test"], cfg.test_stride_s)

    detector = None
    if cfg.setup == 3 and cfg.detector == "train":
        try:
            detector = _train_detector(cfg, train_recs, val_recs, seeds)
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError("stage1", str(e)) from e

    X_train, y_train, _ = _assemble(cfg, train_recs, detector)
    X_val, y_val, gt_val = _assemble(cfg, val_recs, detector)
    X_test, _, gt_test = _assemble(cfg, test_recs, detector)

    try:
        mcfg = ModelConfig(
            input_dim=X_train.shape[2],
            hidden_dim=cfg.hidden_dim,
            n_layers=cfg.n_layers,
            bidirectional=cfg.bidirectional,
            head="classification" if cfg.task == "classification" else "regression",
            conv_kernel=cfg.conv_kernel,
            conv_channels=cfg.conv_channels,
            seed=seeds["model"],
        )
        tcfg = TrainConfig(
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            max_epochs=cfg.max_epochs,
            patience=cfg.patience,
            seed=seeds["train"],
            loss=cfg.resolved_loss(),
        )
        model, history = train(init_model(mcfg), (X_train, y_train), (X_val, y_val), tcfg)
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError("train", str(e)) from e

    thresholds = None
    if cfg.task == "regression":
        try:
            if cfg.postproc.thresholds is not None:
                thresholds = cfg.postproc.thresholds
            else:
                filtered = []
                for start in range(0, X_val.shape[0], cfg.batch_size):
                    out, _ = forward_batch(model, X_val[start:start + cfg.batch_size])
                    filtered.extend(lowpass(row, cfg.postproc.cutoff_hz) for row in out)
                thresholds = sweep_thresholds(filtered, gt_val, cfg.postproc, cfg.match)
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError("sweep", str(e)) from e

    try:
        preds = _predict_labels(cfg, model, X_test, thresholds)
        results = _score(cfg, preds, gt_test)
    except Exception as e:
        raise PipelineError("score", str(e)) from e

    results["n_windows"] = {
        "train": int(X_train.shape[0]),
        "val": int(X_val.shape[0]),
        "test": int(X_test.shape[0]),
    }
    results["history"] = {
        "train_loss": [float(v) for v in history["train_loss"]],
        "val_loss": [float(v) for v in history["val_loss"]],
        "best_epoch": int(history["best_epoch"]),
    }
    results["split"] = {
        "shares": {k: float(v) for k, v in spec.shares.items()},
        "balanced": bool(spec.balanced),
        "assignment": dict(sorted(spec.assignment.items())),
    }
    if thresholds is not None:
        results["thresholds"] = [float(t) for t in thresholds]

    report = {"config": cfg.to_dict(), "protocol": protocol_constants(), "results": results}

    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        save_checkpoint(out / "model.pbck", model)
    return report
