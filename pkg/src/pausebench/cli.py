"""Command-line surface: corpus generation, feature extraction, dataset
prep, training, prediction, postprocessing, scoring, exertion reports,
annotation merging, and the HTTP annotation backend."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import annotation, dataprep, evaluation, exertion, features, models, pipeline, postproc
from .core import (FrameLabelSeq, ManifestRecord, DatasetManifest, decode_events,
                   load_labels, load_manifest, save_labels, save_manifest)
from .protocol import RATE_HZ, protocol_constants

TASK_ALIASES = {"c": "classification", "classification": "classification",
                "r": "regression", "regression": "regression"}


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _parse_fractions(text: str):
    parts = tuple(float(p) for p in text.split(","))
    return parts


def _parse_densities(text: str) -> dict[str, float]:
    if "=" in text:
        out = {}
        for part in text.split(","):
            name, value = part.split("=")
            out[name.strip()] = float(value)
        return out
    s, b, bs = (float(p) for p in text.split(","))
    return {"S": s, "B": b, "BS": bs}


def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(exist_ok=True)
    if args.emb:
        (out / "emb").mkdir(exist_ok=True)
    if args.audio:
        (out / "audio").mkdir(exist_ok=True)
    cfg = dataprep.SynthConfig(densities=_parse_densities(args.densities), noise=args.noise)
    records = []
    for i in range(args.n_recordings):
        rec_seed = int(np.random.SeedSequence((args.seed, i)).generate_state(1)[0])
        rng = np.random.default_rng(rec_seed)
        duration = int(rng.integers(args.min_duration, args.max_duration + 1))
        rid = f"synth-{i:04d}"
        fm, labels, meta = dataprep.synth_generate(
            cfg, T=duration * RATE_HZ, seed=rec_seed + 1,
            recording_id=rid,
            subject_id=f"subj-{i % args.subjects:02d}",
            exertion_level=1 + i % 5,
            task="reading" if args.tasks == "both" and i % 3 == 0 else "spontaneous",
        )
        features.save_matrix(out / "features" / f"{rid}.mfb", fm)
        save_labels(out / "labels" / f"{rid}.json", labels)
        entry = {"features": {"mfb": f"features/{rid}.mfb"}, "labels": f"labels/{rid}.json",
                 "audio": None, "embeddings": {}}
        if args.emb:
            emb = dataprep.synth_embedding(labels, seed=rec_seed + 2, noise=args.noise)
            features.save_matrix(out / "emb" / f"{rid}.emb12", emb)
            entry["embeddings"]["emb12"] = f"emb/{rid}.emb12"
        if args.audio:
            clip = features.AudioClip(rng.normal(0.0, 0.05, size=duration * 16000))
            features.write_wav(out / "audio" / f"{rid}.wav", clip)
            entry["audio"] = f"audio/{rid}.wav"
        records.append(ManifestRecord(meta=meta, **entry))
    manifest = DatasetManifest(root=out, records=records)
    save_manifest(manifest, out / "manifest.json")
    print(f"wrote {len(records)} recordings to {out}")
    return 0


def cmd_features(args) -> int:
    kind = args.kind
    if args.wav:
        clip = features.normalize_audio(features.read_wav(args.wav))
        fm = features.compute_mfb(clip) if kind == "mfb" else features.compute_mfcc(clip)
        features.save_matrix(args.out, fm)
        print(f"wrote {fm.frames}x{fm.dims} {kind} matrix to {args.out}")
        return 0
    manifest = load_manifest(args.manifest)
    (manifest.root / "features").mkdir(exist_ok=True)
    records = []
    done = 0
    for rec in manifest.records:
        if rec.audio and kind not in rec.features:
            clip = features.normalize_audio(features.read_wav(manifest.resolve(rec.audio)))
            fm = features.compute_mfb(clip) if kind == "mfb" else features.compute_mfcc(clip)
            rel = f"features/{rec.meta.id}.{kind}"
            features.save_matrix(manifest.resolve(rel), fm)
            rec = ManifestRecord(meta=rec.meta, audio=rec.audio, labels=rec.labels,
                                 features={**rec.features, kind: rel}, embeddings=rec.embeddings)
            done += 1
        records.append(rec)
    save_manifest(DatasetManifest(root=manifest.root, records=records), args.manifest)
    print(f"computed {kind} for {done} recordings")
    return 0


def cmd_segment(args) -> int:
    manifest = load_manifest(args.manifest)
    windows = []
    for rec in manifest.records:
        for w in dataprep.segment_windows(rec.meta, args.stride):
            windows.append({"recording_id": w.recording_id, "start_s": w.start_s,
                            "length_s": w.length_s})
    doc = {"stride_s": args.stride, "windows": windows}
    if args.out:
        _write_json(args.out, doc)
    else:
        print(json.dumps(doc))
    return 0


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    spec = dataprep.split_by_subject(manifest, _parse_fractions(args.fractions), args.seed)
    doc = {"fractions": list(spec.fractions), "seed": spec.seed,
           "assignment": dict(sorted(spec.assignment.items())),
           "shares": spec.shares, "balanced": spec.balanced}
    if args.out:
        _write_json(args.out, doc)
    else:
        print(json.dumps(doc))
    return 0


def _pipeline_config(args, out_dir=None) -> pipeline.PipelineConfig:
    loss = None
    if args.loss:
        loss = {"loss": args.loss}
        if args.loss == "daf":
            loss.update({"alpha": args.daf_alpha, "gamma": args.daf_gamma, "delta": args.daf_delta})
        if args.loss == "huber":
            loss["delta"] = args.daf_delta
    return pipeline.PipelineConfig(
        manifest=str(args.manifest),
        setup=args.setup,
        task=TASK_ALIASES[args.task],
        feature=args.feature,
        emb=args.emb,
        hidden_dim=args.hidden,
        n_layers=args.layers,
        batch_size=args.batch,
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        loss=loss,
        fractions=_parse_fractions(args.fractions),
        train_stride_s=args.stride,
        test_stride_s=args.test_stride,
        seed=args.seed,
        postproc=postproc.PostprocConfig(
            thresholds=tuple(float(t) for t in args.thresholds.split(",")) if args.thresholds else None,
            sweep_step=args.sweep_step,
        ),
        detector=args.detector,
        detector_hidden=args.detector_hidden,
        detector_epochs=args.detector_epochs,
        out_dir=out_dir,
    )


def _add_pipeline_args(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--setup", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--task", default="c", choices=sorted(TASK_ALIASES))
    p.add_argument("--feature", default="mfb")
    p.add_argument("--emb", default=None)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--loss", default=None, choices=("ce", "huber", "daf"))
    p.add_argument("--daf-alpha", type=float, default=1.0)
    p.add_argument("--daf-gamma", type=float, default=2.0)
    p.add_argument("--daf-delta", type=float, default=1.0)
    p.add_argument("--fractions", default="0.7,0.15,0.15")
    p.add_argument("--stride", type=float, default=1.0)
    p.add_argument("--test-stride", type=float, default=15.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", default=None, help="t1,t2,t3 for the regression branch")
    p.add_argument("--sweep-step", type=float, default=0.05)
    p.add_argument("--detector", default="train", choices=("train", "ones"))
    p.add_argument("--detector-hidden", type=int, default=128)
    p.add_argument("--detector-epochs", type=int, default=10)


def cmd_pipeline(args) -> int:
    report = pipeline.run_pipeline(_pipeline_config(args, out_dir=args.out_dir))
    print(json.dumps(report, indent=2))
    return 0


def cmd_train(args) -> int:
    cfg = _pipeline_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = pipeline.derive_seeds(cfg.seed)
    manifest = load_manifest(cfg.manifest)
    spec = dataprep.split_by_subject(manifest, cfg.fractions, seeds["split"])
    by_split = dataprep.split_records(manifest, spec)
    train_recs = pipeline._load_recordings(manifest, cfg, by_split["train"], cfg.train_stride_s)
    val_recs = pipeline._load_recordings(manifest, cfg, by_split["val"], cfg.train_stride_s)

    detector = None
    if cfg.setup == 3 and cfg.detector == "train":
        detector = pipeline._train_detector(cfg, train_recs, val_recs, seeds)
        models.save_checkpoint(out / "detector.pbck", detector)
    X_train, y_train, _ = pipeline._assemble(cfg, train_recs, detector)
    X_val, y_val, _ = pipeline._assemble(cfg, val_recs, detector)
    mcfg = models.ModelConfig(
        input_dim=X_train.shape[2], hidden_dim=cfg.hidden_dim, n_layers=cfg.n_layers,
        head="classification" if cfg.task == "classification" else "regression",
        seed=seeds["model"],
    )
    tcfg = models.TrainConfig(batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
                              max_epochs=cfg.max_epochs, patience=cfg.patience,
                              seed=seeds["train"], loss=cfg.resolved_loss())
    model, history = models.train(models.init_model(mcfg), (X_train, y_train), (X_val, y_val), tcfg)
    models.save_checkpoint(out / "model.pbck", model)
    _write_json(out / "split.json", {"assignment": dict(sorted(spec.assignment.items())),
                                     "shares": spec.shares, "balanced": spec.balanced})
    _write_json(out / "train_config.json", {"config": cfg.to_dict(), "history": {
        "train_loss": history["train_loss"], "val_loss": history["val_loss"],
        "best_epoch": history["best_epoch"]}, "protocol": protocol_constants()})
    print(f"trained model saved to {out / 'model.pbck'} "
          f"(best epoch {history['best_epoch']}, val loss {min(history['val_loss']):.4f})")
    return 0


def cmd_predict(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = pipeline.PipelineConfig.from_dict(
        json.loads((run_dir / "train_config.json").read_text())["config"])
    model = models.load_checkpoint(run_dir / "model.pbck")
    detector = None
    if cfg.setup == 3 and cfg.detector == "train":
        detector = models.load_checkpoint(run_dir / "detector.pbck")
    split_doc = json.loads((run_dir / "split.json").read_text())
    manifest = load_manifest(args.manifest or cfg.manifest)
    records = [r for r in manifest.records
               if split_doc["assignment"].get(r.meta.subject_id) == args.split]
    recs = pipeline._load_recordings(manifest, cfg, records,
                                     cfg.test_stride_s if args.split == "test" else cfg.train_stride_s)
    out = Path(args.out)
    (out / "raw").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(exist_ok=True)
    index = []
    for rec in recs:
        inputs = pipeline._window_inputs(cfg, rec, detector)
        for w, x in zip(rec.windows, inputs):
            name = f"{rec.meta.id}_{w.start_frame:06d}"
            out_row = models.forward(model, x)
            raw = out_row if out_row.ndim == 2 else out_row[:, None]
            kind = "logits" if cfg.task == "classification" else "regression"
            features.save_array(out / "raw" / f"{name}.f32", raw, kind=kind,
                                extra={"recording_id": rec.meta.id, "start_s": w.start_s})
            sl = dataprep.window_frame_slice(w, len(rec.labels))
            save_labels(out / "gt" / f"{name}.json",
                        FrameLabelSeq(rec.labels.labels[sl], rec.labels.rate_hz))
            index.append({"name": name, "recording_id": rec.meta.id, "start_s": w.start_s,
                          "task": cfg.task})
    _write_json(out / "index.json", {"windows": index, "task": cfg.task})
    print(f"wrote {len(index)} windows to {out}")
    return 0


def cmd_postproc(args) -> int:
    task = TASK_ALIASES[args.task]
    in_dir = Path(args.in_dir)
    out = Path(args.out)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    index = json.loads((in_dir / "index.json").read_text())
    thresholds = tuple(float(t) for t in args.thresholds.split(",")) if args.thresholds else None
    cfg = postproc.PostprocConfig(cutoff_hz=args.cutoff, thresholds=thresholds,
                                  sweep_step=args.sweep_step,
                                  merge_gap_frames=args.merge_gap,
                                  min_event_frames=args.min_event,
                                  bridge_gap_frames=args.bridge_gap,
                                  mask_tail_frames=args.mask)
    if task == "regression" and thresholds is None:
        if not args.sweep:
            raise SystemExit("regression postproc needs --thresholds or --sweep")
        if not args.val_raw or not args.val_gt:
            raise SystemExit("--sweep requires --val-raw and --val-gt directories")
        val_index = json.loads((Path(args.val_raw) / "index.json").read_text())
        filtered, gts = [], []
        for entry in val_index["windows"]:
            data, _ = features.load_array(Path(args.val_raw) / "raw" / f"{entry['name']}.f32")
            filtered.append(postproc.lowpass(data[:, 0], cfg.cutoff_hz))
            gts.append(load_labels(Path(args.val_gt) / f"{entry['name']}.json"))
        thresholds = postproc.sweep_thresholds(filtered, gts, cfg)
        print(f"swept thresholds: {thresholds}")

    raw_seqs = []
    for entry in index["windows"]:
        data, _ = features.load_array(in_dir / "raw" / f"{entry['name']}.f32")
        if task == "classification":
            seq = FrameLabelSeq(np.argmax(data, axis=1))
            cleaned = postproc.clean_classification(seq, cfg)
            raw_seqs.append(seq.labels.astype(np.float64))
        else:
            filtered = postproc.lowpass(data[:, 0], cfg.cutoff_hz)
            raw_seqs.append(filtered)
            seq = postproc.regression_to_classes(filtered, thresholds)
            cleaned = postproc.merge_low_high(seq, cfg.merge_gap_frames)
        save_labels(out / "labels" / f"{entry['name']}.json", cleaned)
    if raw_seqs and len({len(s) for s in raw_seqs}) == 1:
        freqs, mags = postproc.spectrum_profile(raw_seqs)
        with open(out / "spectrum.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["freq_hz", "magnitude"])
            for f, m in zip(freqs, mags):
                writer.writerow([f"{f:.6f}", f"{m:.8f}"])
    print(f"cleaned {len(index['windows'])} windows into {out / 'labels'}")
    return 0


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    cfg = evaluation.MatchConfig(tolerance_frames=args.tolerance, min_overlap_ratio=args.overlap)
    names = sorted(p.stem for p in gt_dir.glob("*.json"))
    gt_counts = {"S": 0, "B": 0, "BS": 0}
    agree_counts = {"S": 0, "B": 0, "BS": 0}
    rows = []
    for name in names:
        gt_seq = load_labels(gt_dir / f"{name}.json")
        pred_path = pred_dir / f"{name}.json"
        pred_seq = load_labels(pred_path) if pred_path.exists() else FrameLabelSeq(
            np.zeros(len(gt_seq), dtype=np.int64))
        T = len(gt_seq)
        gt_ev = postproc.mask_tail(decode_events(gt_seq), args.mask, T)
        pred_ev = postproc.mask_tail(decode_events(pred_seq), args.mask, T)
        result = evaluation.greedy_match(gt_ev, pred_ev, cfg)
        agree = sum(1 for _, _, ok in result.pairs if ok)
        for g in gt_ev:
            gt_counts[g.ptype.name] += 1
        for g, _, ok in result.pairs:
            if ok:
                agree_counts[g.ptype.name] += 1
        rows.append([name, len(gt_ev), len(pred_ev), len(result.pairs), agree,
                     f"{agree / len(gt_ev):.4f}" if gt_ev else "n/a"])
    total_gt = sum(gt_counts.values())
    report = {
        "per_type": {t: (agree_counts[t] / gt_counts[t]) if gt_counts[t] else "n/a"
                     for t in ("S", "B", "BS")},
        "overall": (sum(agree_counts.values()) / total_gt) if total_gt else "n/a",
        "counts": {"gt": gt_counts, "agree": agree_counts, "files": len(names)},
        "match": {"tolerance_frames": args.tolerance, "min_overlap_ratio": args.overlap,
                  "mask_tail_frames": args.mask},
        "protocol": protocol_constants(),
    }
    if args.out:
        _write_json(args.out, report)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "gt_events", "pred_events", "pairs", "agree", "accuracy"])
            writer.writerows(rows)
    print(json.dumps(report))
    return 0


def cmd_exertion(args) -> int:
    manifest = load_manifest(args.manifest)
    seeds = pipeline.derive_seeds(args.seed)
    spec = dataprep.split_by_subject(manifest, _parse_fractions(args.fractions), seeds["split"])
    by_split = dataprep.split_records(manifest, spec)

    def snippets(records):
        pooled, levels = [], []
        for rec in records:
            if args.subset == "spontaneous" and rec.meta.task != "spontaneous":
                continue
            fm = features.load_matrix(manifest.resolve(rec.features[args.feature]))
            for w in dataprep.segment_windows(rec.meta, args.stride):
                sl = dataprep.window_frame_slice(w, fm.frames)
                pooled.append(exertion.pool_features(fm.data[sl]))
                if args.levels == 2:
                    label = exertion.cluster_exertion(rec.meta.exertion_level)
                    levels.append(1 if label.binary == exertion.LOW_LABEL else 2)
                else:
                    levels.append(rec.meta.exertion_level)
        return (np.stack(pooled) if pooled else np.zeros((0, 1))), np.asarray(levels, dtype=np.int64)

    X_train, y_train = snippets(by_split["train"])
    X_test, y_test = snippets(by_split["test"])
    if X_train.shape[0] == 0 or X_test.shape[0] == 0:
        raise SystemExit("no snippets in train or test split for this subset")
    head, history = exertion.train_coral_head(X_train, y_train, n_levels=args.levels,
                                              epochs=args.epochs, lr=args.lr,
                                              seed=seeds["model"])
    pred = exertion.coral_predict_batch(head, X_test)
    acc = float((pred == y_test).mean())
    report = {
        "subset": args.subset,
        "feature": args.feature,
        "levels": args.levels,
        "accuracy": acc,
        "train_snippets": int(X_train.shape[0]),
        "test_snippets": int(X_test.shape[0]),
        "final_loss": history[-1],
        "protocol": protocol_constants(),
    }
    if args.out:
        _write_json(args.out, report)
    print(json.dumps(report))
    return 0


def cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    labels = {}
    for rec in manifest.records:
        if rec.labels:
            labels[rec.meta.id] = load_labels(manifest.resolve(rec.labels))
    assignment = None
    if args.split:
        assignment = json.loads(Path(args.split).read_text())["assignment"]
    report = annotation.corpus_stats(manifest, labels, assignment)
    if args.out:
        _write_json(args.out, report)
    else:
        print(json.dumps(report))
    return 0


def cmd_merge(args) -> int:
    seqs = [load_labels(p) for p in args.tracks]
    merged = annotation.majority_vote(seqs)
    doc = annotation.merged_label_doc(merged, [Path(p).stem for p in args.tracks])
    Path(args.out).write_text(json.dumps(doc) + "\n")
    print(f"merged {len(args.tracks)} tracks into {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .serve import make_server

    server = make_server(args.manifest, host=args.host, port=args.port, verbose=args.verbose)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pausebench",
                                     description="Pause detection and exertion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-recordings", type=int, default=20)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-duration", type=int, default=18)
    p.add_argument("--max-duration", type=int, default=30)
    p.add_argument("--densities", default="4,3,2", help="S,B,BS events per minute")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--audio", action="store_true", help="also write placeholder WAV audio")
    p.add_argument("--emb", action="store_true", help="also write synthetic 768-dim embeddings")
    p.add_argument("--tasks", default="spontaneous", choices=("spontaneous", "both"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="compute MFB/MFCC features")
    p.add_argument("--kind", default="mfb", choices=("mfb", "mfcc"))
    p.add_argument("--wav", help="single WAV file mode")
    p.add_argument("--out", help="output matrix path (single file mode)")
    p.add_argument("--manifest", help="corpus mode: compute for every recording with audio")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("segment", help="list sliding windows")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stride", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("split", help="subject-disjoint duration-balanced split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fractions", default="0.7,0.15,0.15")
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model, saving checkpoint + split")
    _add_pipeline_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="raw model outputs for a split")
    p.add_argument("--run-dir", required=True, help="directory written by train")
    p.add_argument("--manifest", default=None)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("postproc", help="clean raw outputs into label files")
    p.add_argument("--task", required=True, choices=sorted(TASK_ALIASES))
    p.add_argument("--in-dir", required=True, help="directory written by predict")
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff", type=float, default=0.05)
    p.add_argument("--thresholds", default=None)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--val-raw", default=None)
    p.add_argument("--val-gt", default=None)
    p.add_argument("--sweep-step", type=float, default=0.05)
    p.add_argument("--merge-gap", type=int, default=5)
    p.add_argument("--min-event", type=int, default=3)
    p.add_argument("--bridge-gap", type=int, default=2)
    p.add_argument("--mask", type=int, default=50)
    p.set_defaults(func=cmd_postproc)

    p = sub.add_parser("eval", help="event-level scoring of label files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tolerance", type=int, default=10)
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--mask", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("exertion", help="snippet-level exertion accuracy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--subset", default="both", choices=("spontaneous", "both"))
    p.add_argument("--feature", default="mfb")
    p.add_argument("--levels", type=int, default=2, choices=(2, 5))
    p.add_argument("--stride", type=float, default=15.0)
    p.add_argument("--fractions", default="0.7,0.15,0.15")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exertion)

    p = sub.add_parser("stats", help="corpus statistics report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None, help="split.json for per-split stats")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("merge", help="majority-vote merge of label files")
    p.add_argument("--tracks", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("serve", help="run the annotation HTTP backend")
    p.add_argument("--manifest", default=None, help="defaults to $PAUSEBENCH_DATA/manifest.json")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("pipeline", help="full run: train, predict, postprocess, score")
    _add_pipeline_args(p)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, pipeline.PipelineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
