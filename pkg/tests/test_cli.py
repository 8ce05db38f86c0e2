"""Command-line surface: corpus generation, the train/predict/postproc/eval
chain, and error reporting. Everything drives cli.main() in process."""

import json
import wave

import numpy as np
import pytest

from pausebench import cli, features
from pausebench.core import FrameLabelSeq, load_labels, save_labels


def run(*argv):
    return cli.main([str(a) for a in argv])


class TestSynth:
    def test_layout(self, corpus_dir):
        assert (corpus_dir / "manifest.json").is_file()
        mfbs = sorted((corpus_dir / "features").glob("*.mfb"))
        assert len(mfbs) == 12
        assert len(list((corpus_dir / "labels").glob("*.json"))) == 12
        assert len(list((corpus_dir / "emb").glob("*.emb12"))) == 12
        assert len(list((corpus_dir / "audio").glob("*.wav"))) == 12
        fm = features.load_matrix(mfbs[0])
        assert fm.kind == "mfb" and fm.dims == 40

    def test_deterministic(self, tmp_path):
        args = ["synth", "--n-recordings", "3", "--subjects", "3", "--seed", "4",
                "--min-duration", "16", "--max-duration", "18", "--emb"]
        assert run(*args, "--out", tmp_path / "a") == 0
        assert run(*args, "--out", tmp_path / "b") == 0
        for rel in ("features/synth-0000.mfb", "emb/synth-0000.emb12",
                    "labels/synth-0000.json"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_metadata_rotation(self, corpus_dir):
        doc = json.loads((corpus_dir / "manifest.json").read_text())
        recs = doc["records"]
        subjects = {r["subject_id"] for r in recs}
        assert subjects == {f"subj-{i:02d}" for i in range(6)}
        levels = [r["exertion_level"] for r in recs]
        assert set(levels) == {1, 2, 3, 4, 5}
        tasks = [r["task"] for r in recs]
        assert tasks[0] == "reading" and tasks[1] == "spontaneous"


class TestFeatures:
    def test_single_wav_mode(self, tmp_path):
        t = np.arange(32000) / 16000.0
        clip = features.AudioClip(0.4 * np.sin(2 * np.pi * 440 * t))
        features.write_wav(tmp_path / "tone.wav", clip)
        out = tmp_path / "tone.mfb"
        assert run("features", "--wav", tmp_path / "tone.wav", "--out", out) == 0
        fm = features.load_matrix(out)
        assert (fm.frames, fm.dims, fm.kind) == (100, 40, "mfb")

    def test_manifest_mode_adds_mfcc(self, tmp_path):
        root = tmp_path / "c"
        assert run("synth", "--out", root, "--n-recordings", "3", "--subjects", "3",
                   "--seed", "2", "--min-duration", "16", "--max-duration", "17",
                   "--audio") == 0
        assert run("features", "--kind", "mfcc", "--manifest", root / "manifest.json") == 0
        doc = json.loads((root / "manifest.json").read_text())
        for rec in doc["records"]:
            assert "mfcc" in rec["features"]
            fm = features.load_matrix(root / rec["features"]["mfcc"])
            assert fm.kind == "mfcc" and fm.dims == 40


class TestSegmentSplitStats:
    def test_segment_counts(self, corpus_dir, tmp_path):
        out = tmp_path / "w.json"
        assert run("segment", "--manifest", corpus_dir / "manifest.json",
                   "--stride", "1.0", "--out", out) == 0
        doc = json.loads(out.read_text())
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        expected = sum(int((r["duration_s"] - 15.0) // 1.0) + 1
                       for r in manifest["records"])
        assert len(doc["windows"]) == expected
        assert all(w["length_s"] == 15.0 for w in doc["windows"])

    def test_split_doc(self, corpus_dir, tmp_path):
        out = tmp_path / "s.json"
        assert run("split", "--manifest", corpus_dir / "manifest.json",
                   "--seed", "3", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert set(doc["assignment"].values()) == {"train", "val", "test"}
        assert sum(doc["shares"].values()) == pytest.approx(1.0)

    def test_stats_report(self, corpus_dir, tmp_path, capsys):
        assert run("stats", "--manifest", corpus_dir / "manifest.json") == 0
        doc = json.loads(capsys.readouterr().out)
        assert set(doc["splits"]) == {"all"}
        assert doc["splits"]["all"]["recordings"] == 12
        split_file = tmp_path / "s.json"
        assert run("split", "--manifest", corpus_dir / "manifest.json",
                   "--out", split_file) == 0
        assert run("stats", "--manifest", corpus_dir / "manifest.json",
                   "--split", split_file, "--out", tmp_path / "st.json") == 0
        doc = json.loads((tmp_path / "st.json").read_text())
        assert set(doc["splits"]) == {"train", "val", "test"}


class TestMerge:
    def test_majority_of_three(self, tmp_path):
        base = np.zeros(60, dtype=np.int64)
        a, b, c = base.copy(), base.copy(), base.copy()
        a[10:20] = 1
        b[10:20] = 1
        c[10:20] = 2
        for name, arr in (("a", a), ("b", b), ("c", c)):
            save_labels(tmp_path / f"{name}.json", FrameLabelSeq(arr))
        out = tmp_path / "merged.json"
        assert run("merge", "--tracks", tmp_path / "a.json", tmp_path / "b.json",
                   tmp_path / "c.json", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["merge"] == "majority"
        assert doc["annotators"] == ["a", "b", "c"]
        assert doc["labels"][10:20] == [1] * 10
        merged = load_labels(out)
        assert np.array_equal(merged.labels, a)


@pytest.fixture(scope="module")
def chain_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("chain")
    assert run("synth", "--out", root, "--n-recordings", "6", "--subjects", "3",
               "--seed", "5", "--min-duration", "16", "--max-duration", "18") == 0
    return root


FAST_TRAIN = ("--hidden", "4", "--layers", "1", "--epochs", "2", "--batch", "16",
              "--lr", "1e-3", "--fractions", "0.34,0.33,0.33")


class TestTrainChain:
    def test_classification_chain(self, chain_corpus, tmp_path):
        run_dir = tmp_path / "run"
        assert run("train", "--manifest", chain_corpus / "manifest.json",
                   "--out-dir", run_dir, *FAST_TRAIN) == 0
        for name in ("model.pbck", "split.json", "train_config.json"):
            assert (run_dir / name).is_file()
        tc = json.loads((run_dir / "train_config.json").read_text())
        assert tc["protocol"]["rate_hz"] == 50
        assert len(tc["history"]["train_loss"]) >= 1

        pred_dir = tmp_path / "pred"
        assert run("predict", "--run-dir", run_dir, "--split", "test",
                   "--out", pred_dir) == 0
        index = json.loads((pred_dir / "index.json").read_text())
        assert index["task"] == "classification"
        assert len(index["windows"]) >= 1
        name = index["windows"][0]["name"]
        raw, side = features.load_array(pred_dir / "raw" / f"{name}.f32")
        assert raw.shape == (750, 4) and side["kind"] == "logits"
        assert len(load_labels(pred_dir / "gt" / f"{name}.json")) == 750

        post_dir = tmp_path / "post"
        assert run("postproc", "--task", "c", "--in-dir", pred_dir,
                   "--out", post_dir) == 0
        labels = sorted((post_dir / "labels").glob("*.json"))
        assert len(labels) == len(index["windows"])
        assert (post_dir / "spectrum.csv").is_file()

        report_path = tmp_path / "report.json"
        assert run("eval", "--pred", post_dir / "labels", "--gt", pred_dir / "gt",
                   "--out", report_path, "--csv", tmp_path / "rows.csv") == 0
        report = json.loads(report_path.read_text())
        assert set(report["per_type"]) == {"S", "B", "BS"}
        assert report["protocol"]["tolerance_frames"] == 10
        rows = (tmp_path / "rows.csv").read_text().strip().splitlines()
        assert rows[0].startswith("name,") and len(rows) == len(labels) + 1

    def test_regression_chain_with_sweep(self, chain_corpus, tmp_path):
        run_dir = tmp_path / "run"
        assert run("train", "--manifest", chain_corpus / "manifest.json",
                   "--task", "r", "--out-dir", run_dir, *FAST_TRAIN) == 0
        val_dir = tmp_path / "val"
        assert run("predict", "--run-dir", run_dir, "--split", "val",
                   "--out", val_dir) == 0
        test_dir = tmp_path / "test"
        assert run("predict", "--run-dir", run_dir, "--split", "test",
                   "--out", test_dir) == 0
        name = json.loads((test_dir / "index.json").read_text())["windows"][0]["name"]
        raw, side = features.load_array(test_dir / "raw" / f"{name}.f32")
        assert raw.shape == (750, 1) and side["kind"] == "regression"

        post_dir = tmp_path / "post"
        assert run("postproc", "--task", "r", "--in-dir", test_dir, "--out", post_dir,
                   "--sweep", "--val-raw", val_dir, "--val-gt", val_dir / "gt",
                   "--sweep-step", "0.5") == 0
        assert len(list((post_dir / "labels").glob("*.json"))) >= 1

    def test_regression_postproc_needs_thresholds_or_sweep(self, chain_corpus, tmp_path):
        run_dir = tmp_path / "run"
        assert run("train", "--manifest", chain_corpus / "manifest.json",
                   "--task", "r", "--out-dir", run_dir, *FAST_TRAIN) == 0
        pred_dir = tmp_path / "pred"
        assert run("predict", "--run-dir", run_dir, "--out", pred_dir) == 0
        with pytest.raises(SystemExit):
            run("postproc", "--task", "r", "--in-dir", pred_dir,
                "--out", tmp_path / "post")

    def test_missing_predictions_score_zero(self, chain_corpus, tmp_path):
        gt_dir = tmp_path / "gt"
        gt_dir.mkdir()
        arr = np.zeros(300, dtype=np.int64)
        arr[100:130] = 1
        save_labels(gt_dir / "w1.json", FrameLabelSeq(arr))
        empty = tmp_path / "none"
        empty.mkdir()
        out = tmp_path / "r.json"
        assert run("eval", "--pred", empty, "--gt", gt_dir, "--out", out) == 0
        report = json.loads(out.read_text())
        assert report["overall"] == 0.0
        assert report["counts"]["gt"]["S"] == 1


class TestExertionCommand:
    def test_binary_report(self, corpus_dir, tmp_path):
        out = tmp_path / "ex.json"
        assert run("exertion", "--manifest", corpus_dir / "manifest.json",
                   "--levels", "2", "--epochs", "50", "--lr", "0.1",
                   "--out", out) == 0
        report = json.loads(out.read_text())
        assert 0.0 <= report["accuracy"] <= 1.0
        assert report["train_snippets"] > 0 and report["test_snippets"] > 0
        assert report["protocol"]["exertion_clusters"]["low"] == [1, 2]


class TestErrors:
    def test_missing_manifest_returns_1(self, tmp_path, capsys):
        assert run("segment", "--manifest", tmp_path / "nope.json") == 1
        assert capsys.readouterr().err.strip() != ""

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 2

    def test_pipeline_error_returns_1(self, tmp_path, capsys):
        assert run("pipeline", "--manifest", tmp_path / "nope.json") == 1
        assert "manifest" in capsys.readouterr().err

    def test_bad_wav_returns_1(self, tmp_path, capsys):
        bad = tmp_path / "x.wav"
        with wave.open(str(bad), "wb") as fh:
            fh.setnchannels(2)
            fh.setsampwidth(2)
            fh.setframerate(16000)
            fh.writeframes(b"\x00\x00" * 64)
        assert run("features", "--wav", bad, "--out", tmp_path / "x.mfb") == 1
        assert capsys.readouterr().err.strip() != ""
