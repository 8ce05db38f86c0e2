"""Local HTTP backend for the annotation UI.

Read-mostly JSON service over a corpus manifest. Label writes are
validated, then the request bytes are stored verbatim, so a PUT/GET
round-trip is byte-identical. Writes to one recording are serialized
behind a per-recording lock; concurrent writers follow last-writer-wins
with a version counter reported on every write.
"""

from __future__ import annotations

import json
import os
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .annotation import majority_vote, merged_label_doc
from .core import FrameLabelSeq, load_manifest
from .features import load_matrix

ANNOTATOR_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
DATA_ENV_VAR = "PAUSEBENCH_DATA"


class LabelStore:
    """Per-annotator label files under <root>/annotations/<rec>/<name>.json."""

    def __init__(self, root: Path):
        self.root = Path(root) / "annotations"
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._versions: dict[tuple[str, str], int] = {}
        if self.root.is_dir():
            for rec_dir in self.root.iterdir():
                for f in rec_dir.glob("*.json"):
                    self._versions[(rec_dir.name, f.stem)] = 1

    def lock(self, recording_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(recording_id, threading.Lock())

    def _path(self, recording_id: str, annotator: str) -> Path:
        return self.root / recording_id / f"{annotator}.json"

    def get(self, recording_id: str, annotator: str):
        path = self._path(recording_id, annotator)
        if not path.exists():
            return None, 0
        return path.read_bytes(), self._versions.get((recording_id, annotator), 1)

    def put(self, recording_id: str, annotator: str, body: bytes) -> int:
        with self.lock(recording_id):
            path = self._path(recording_id, annotator)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(body)
            version = self._versions.get((recording_id, annotator), 0) + 1
            self._versions[(recording_id, annotator)] = version
            return version

    def annotators(self, recording_id: str) -> list[str]:
        rec_dir = self.root / recording_id
        if not rec_dir.is_dir():
            return []
        return sorted(f.stem for f in rec_dir.glob("*.json"))


def _validate_label_body(body: bytes, frames: int) -> dict:
    try:
        doc = json.loads(body.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"body is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise ValueError("body must be a JSON object")
    if "rate_hz" not in doc or "labels" not in doc:
        raise ValueError('body must contain "rate_hz" and "labels"')
    labels = doc["labels"]
    if not isinstance(labels, list) or not all(isinstance(v, int) and 0 <= v <= 3 for v in labels):
        raise ValueError("labels must be a list of integers in {0,1,2,3}")
    if len(labels) != frames:
        raise ValueError(f"expected {frames} labels, got {len(labels)}")
    return doc


class _Handler(BaseHTTPRequestHandler):
    server_version = "pausebench"
    protocol_version = "HTTP/1.1"

    # the server object carries .manifest, .store, .verbose

    def log_message(self, fmt, *args):
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _send(self, code: int, body: bytes, ctype: str = "application/json",
              headers: dict | None = None):
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def _json(self, code: int, doc, headers: dict | None = None):
        self._send(code, (json.dumps(doc) + "\n").encode(), headers=headers)

    def _error(self, code: int, message: str):
        self._json(code, {"error": message})

    def _record(self, recording_id: str):
        try:
            return self.server.manifest.by_id(recording_id)
        except KeyError:
            return None

    def do_OPTIONS(self):
        self._send(204, b"")

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts == ["recordings"]:
            return self._list_recordings()
        if len(parts) == 3 and parts[0] == "recordings" and parts[2] == "audio":
            return self._get_audio(parts[1])
        if len(parts) == 4 and parts[0] == "recordings" and parts[2] == "labels":
            return self._get_labels(parts[1], parts[3])
        if len(parts) == 3 and parts[0] == "recordings" and parts[2] == "features":
            return self._get_features(parts[1], parse_qs(url.query))
        self._error(404, f"unknown path {url.path}")

    def do_PUT(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if len(parts) == 4 and parts[0] == "recordings" and parts[2] == "labels":
            return self._put_labels(parts[1], parts[3])
        self._error(404, f"unknown path {self.path}")

    def do_POST(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if len(parts) == 3 and parts[0] == "recordings" and parts[2] == "merge":
            return self._merge(parts[1])
        self._error(404, f"unknown path {self.path}")

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length) if length else b""

    def _list_recordings(self):
        out = []
        for rec in self.server.manifest.records:
            m = rec.meta
            out.append({
                "id": m.id,
                "subject_id": m.subject_id,
                "duration_s": m.duration_s,
                "frames": m.frames,
                "exertion_level": m.exertion_level,
                "task": m.task,
                "has_audio": rec.audio is not None,
                "features": sorted(rec.features),
                "annotators": self.server.store.annotators(m.id),
            })
        self._json(200, out)

    def _get_audio(self, recording_id: str):
        rec = self._record(recording_id)
        if rec is None:
            return self._error(404, f"no recording {recording_id!r}")
        if not rec.audio:
            return self._error(404, f"recording {recording_id!r} has no audio")
        path = self.server.manifest.resolve(rec.audio)
        self._send(200, path.read_bytes(), ctype="audio/wav")

    def _get_labels(self, recording_id: str, annotator: str):
        rec = self._record(recording_id)
        if rec is None:
            return self._error(404, f"no recording {recording_id!r}")
        if not ANNOTATOR_RE.match(annotator):
            return self._error(400, "invalid annotator name")
        body, version = self.server.store.get(recording_id, annotator)
        if body is None:
            return self._error(404, f"no labels from {annotator!r} for {recording_id!r}")
        self._send(200, body, headers={"X-Version": str(version)})

    def _put_labels(self, recording_id: str, annotator: str):
        rec = self._record(recording_id)
        if rec is None:
            return self._error(404, f"no recording {recording_id!r}")
        if not ANNOTATOR_RE.match(annotator):
            return self._error(400, "invalid annotator name")
        body = self._body()
        try:
            _validate_label_body(body, rec.meta.frames)
        except ValueError as e:
            return self._error(400, str(e))
        version = self.server.store.put(recording_id, annotator, body)
        self._json(200, {"recording_id": recording_id, "annotator": annotator, "version": version})

    def _merge(self, recording_id: str):
        rec = self._record(recording_id)
        if rec is None:
            return self._error(404, f"no recording {recording_id!r}")
        try:
            doc = json.loads(self._body().decode() or "{}")
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            return self._error(400, f"body is not valid JSON: {e}")
        names = doc.get("annotators") or self.server.store.annotators(recording_id)
        if len(names) < 2:
            return self._error(400, "need at least 2 annotator tracks to merge")
        seqs = []
        for name in names:
            if not ANNOTATOR_RE.match(str(name)):
                return self._error(400, f"invalid annotator name {name!r}")
            body, _ = self.server.store.get(recording_id, name)
            if body is None:
                return self._error(400, f"no labels from {name!r} for {recording_id!r}")
            stored = json.loads(body.decode())
            seqs.append(FrameLabelSeq(np.asarray(stored["labels"], dtype=np.int64),
                                      int(stored["rate_hz"])))
        merged = majority_vote(seqs)
        out = merged_label_doc(merged, [str(n) for n in names])
        headers = None
        save_as = doc.get("save_as")
        if save_as:
            if not ANNOTATOR_RE.match(str(save_as)):
                return self._error(400, f"invalid annotator name {save_as!r}")
            body = (json.dumps(out) + "\n").encode()
            version = self.server.store.put(recording_id, str(save_as), body)
            headers = {"X-Version": str(version)}
        self._json(200, out, headers=headers)

    def _get_features(self, recording_id: str, query: dict):
        rec = self._record(recording_id)
        if rec is None:
            return self._error(404, f"no recording {recording_id!r}")
        kind = (query.get("kind") or ["mfb"])[0]
        if kind not in rec.features:
            return self._error(404, f"recording {recording_id!r} has no {kind!r} features")
        fm = load_matrix(self.server.manifest.resolve(rec.features[kind]))
        values = fm.data.mean(axis=1)
        points = int((query.get("points") or [0])[0])
        if points and fm.frames > points:
            edges = np.linspace(0, fm.frames, points + 1).astype(int)
            values = np.array([values[a:b].mean() for a, b in zip(edges, edges[1:]) if b > a])
        self._json(200, {
            "kind": kind,
            "rate_hz": fm.rate_hz,
            "frames": fm.frames,
            "values": [float(v) for v in values],
        })


def make_server(manifest_path=None, host: str = "127.0.0.1", port: int = 0,
                verbose: bool = False) -> ThreadingHTTPServer:
    """Build the HTTP server (not yet serving). PAUSEBENCH_DATA overrides
    the data root when no manifest path is given."""
    if manifest_path is None:
        root = os.environ.get(DATA_ENV_VAR)
        if not root:
            raise ValueError(f"no manifest path given and {DATA_ENV_VAR} is not set")
        manifest_path = Path(root) / "manifest.json"
    manifest = load_manifest(manifest_path)
    server = ThreadingHTTPServer((host, port), _Handler)
    server.manifest = manifest
    server.store = LabelStore(manifest.root)
    server.verbose = verbose
    return server
