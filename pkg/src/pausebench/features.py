"""Audio ingestion and frame-level features.

Framing is fixed at a 25 ms window with a 20 ms hop over 16 kHz audio,
which lands exactly on the 50 Hz frame grid: a clip of d seconds yields
round(d * 50) rows (edge-padded at the tail when the last window would
run past the signal).
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct
from scipy.signal import resample_poly

from .protocol import AUDIO_RATE_HZ, RATE_HZ

WINDOW_SAMPLES = 400
HOP_SAMPLES = 320
NFFT = 512
N_MELS = 40
LOG_FLOOR = 1e-10
FMIN_HZ = 0.0
FMAX_HZ = 8000.0

FEATURE_DIMS = {"mfb": 40, "mfcc": 40, "emb4": 768, "emb6": 768, "emb12": 768, "fused": 808}

# fixed extraction settings, embedded in sidecars so outputs are auditable
FEATURE_CONFIG = {
    "window_samples": WINDOW_SAMPLES,
    "hop_samples": HOP_SAMPLES,
    "nfft": NFFT,
    "n_mels": N_MELS,
    "fmin_hz": FMIN_HZ,
    "fmax_hz": FMAX_HZ,
    "log_floor": LOG_FLOOR,
    "window": "hann-periodic",
    "pre_emphasis": None,
    "mel_scale": "htk",
    "filter_shape": "triangular",
}


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    rate_hz: int = AUDIO_RATE_HZ
    degenerate: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.rate_hz


@dataclass(frozen=True)
class FeatureMatrix:
    """T x F matrix on the 50 Hz frame grid."""

    data: np.ndarray
    kind: str
    rate_hz: int = RATE_HZ

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("data must be a non-empty 2-D matrix")
        if self.kind not in FEATURE_DIMS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if data.shape[1] != FEATURE_DIMS[self.kind]:
            raise ValueError(
                f"kind {self.kind} requires {FEATURE_DIMS[self.kind]} columns, got {data.shape[1]}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]


def normalize_audio(clip: AudioClip) -> AudioClip:
    """Remove the mean and scale to unit population variance.

    Constant input cannot be scaled; it comes back zero-mean with the
    degenerate flag set.
    """
    x = clip.samples
    mean = x.mean()
    var = x.var()
    if var == 0.0:
        return AudioClip(x - mean, clip.rate_hz, degenerate=True)
    return AudioClip((x - mean) / math.sqrt(var), clip.rate_hz)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = N_MELS, nfft: int = NFFT, rate_hz: int = AUDIO_RATE_HZ,
                   fmin: float = FMIN_HZ, fmax: float = FMAX_HZ):
    """Triangular filters on the mel scale; returns (weights, centers_hz).

    weights: (n_mels, nfft//2 + 1), peak value 1 at each filter's center.
    """
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bin_hz = np.arange(nfft // 2 + 1) * (rate_hz / nfft)
    weights = np.zeros((n_mels, bin_hz.size))
    for i in range(n_mels):
        lo, mid, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_hz - lo) / (mid - lo)
        falling = (hi - bin_hz) / (hi - mid)
        weights[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    peaks = weights.max(axis=1)
    if np.any(peaks == 0.0):
        raise ValueError("a mel filter has no FFT bin support; increase nfft")
    weights /= peaks[:, None]
    return weights, edges_hz[1:-1]


def frame_count(n_samples: int, rate_hz: int = AUDIO_RATE_HZ) -> int:
    return int(round(n_samples / rate_hz * RATE_HZ))


def _frame_signal(x: np.ndarray) -> np.ndarray:
    """Slice into 25 ms windows every 20 ms, edge-padding the tail so the
    row count is exactly round(duration * 50)."""
    T = frame_count(x.size)
    needed = (T - 1) * HOP_SAMPLES + WINDOW_SAMPLES
    if needed > x.size:
        x = np.pad(x, (0, needed - x.size), mode="edge")
    idx = np.arange(T)[:, None] * HOP_SAMPLES + np.arange(WINDOW_SAMPLES)[None, :]
    return x[idx]


def _log_mel(clip: AudioClip) -> np.ndarray:
    if clip.rate_hz != AUDIO_RATE_HZ:
        raise ValueError(f"expected {AUDIO_RATE_HZ} Hz audio, got {clip.rate_hz}")
    if clip.samples.size < WINDOW_SAMPLES:
        raise ValueError("clip shorter than one analysis window")
    frames = _frame_signal(clip.samples)
    n = np.arange(WINDOW_SAMPLES)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / WINDOW_SAMPLES)
    spec = np.fft.rfft(frames * window, n=NFFT, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    weights, _ = mel_filterbank()
    energies = power @ weights.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def compute_mfb(clip: AudioClip) -> FeatureMatrix:
    """Log mel-filterbank energies, 40 bands at 50 Hz."""
    return FeatureMatrix(_log_mel(clip), "mfb")


def compute_mfcc(clip: AudioClip) -> FeatureMatrix:
    """Orthonormal type-II DCT of the log mel energies, all 40 coefficients."""
    return FeatureMatrix(dct(_log_mel(clip), type=2, norm="ortho", axis=1), "mfcc")


def resample_embedding(emb: FeatureMatrix, target_T: int) -> FeatureMatrix:
    """Linear interpolation along time to target_T rows.

    Endpoints are preserved exactly; equal row counts return the input
    data unchanged.
    """
    if not emb.kind.startswith("emb"):
        raise ValueError(f"expected an embedding matrix, got kind {emb.kind!r}")
    if emb.frames < 2:
        raise ValueError("need at least 2 rows to resample")
    if target_T < 2:
        raise ValueError("target_T must be >= 2")
    if emb.frames == target_T:
        return emb
    xs_old = np.linspace(0.0, 1.0, emb.frames)
    xs_new = np.linspace(0.0, 1.0, target_T)
    data = np.empty((target_T, emb.dims))
    for col in range(emb.dims):
        data[:, col] = np.interp(xs_new, xs_old, emb.data[:, col])
    return FeatureMatrix(data, emb.kind)


def fuse(acoustic: FeatureMatrix, emb: FeatureMatrix) -> FeatureMatrix:
    """Concatenate along columns: acoustic 0-39, embedding 40-807."""
    if acoustic.dims != 40:
        raise ValueError(f"acoustic input must have 40 columns, got {acoustic.dims}")
    if emb.dims != 768:
        raise ValueError(f"embedding input must have 768 columns, got {emb.dims}")
    if acoustic.frames != emb.frames:
        raise ValueError(
            f"frame count mismatch: acoustic has {acoustic.frames}, embedding has {emb.frames}"
        )
    return FeatureMatrix(np.concatenate([acoustic.data, emb.data], axis=1), "fused")


def read_wav(path: str | Path, target_rate_hz: int = AUDIO_RATE_HZ) -> AudioClip:
    """Read 16-bit PCM mono WAV; resample to the target rate if needed."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise ValueError(f"{path}: only mono WAV is supported")
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM is supported")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if rate != target_rate_hz:
        g = math.gcd(rate, target_rate_hz)
        samples = resample_poly(samples, target_rate_hz // g, rate // g)
    return AudioClip(samples, target_rate_hz)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    pcm = np.clip(clip.samples, -1.0, 1.0 - 1.0 / 32768) * 32768.0
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.rate_hz)
        wf.writeframes(pcm.astype("<i2").tobytes())


def save_array(path: str | Path, data: np.ndarray, kind: str, rate_hz: int = RATE_HZ,
               extra: dict | None = None) -> None:
    """Write a 2-D matrix as raw little-endian float32, row-major, with a
    JSON sidecar at path + ".json" describing its shape and kind."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("only 2-D matrices are stored")
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(data, dtype="<f4").tobytes())
    sidecar = {"frames": data.shape[0], "dims": data.shape[1], "rate_hz": rate_hz, "kind": kind}
    if extra:
        sidecar.update(extra)
    Path(str(path) + ".json").write_text(json.dumps(sidecar) + "\n")


def load_array(path: str | Path):
    """Read a raw matrix and its sidecar; returns (float64 array, sidecar dict)."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    frames, dims = int(meta["frames"]), int(meta["dims"])
    flat = np.frombuffer(path.read_bytes(), dtype="<f4")
    if flat.size != frames * dims:
        raise ValueError(f"{path}: expected {frames}x{dims} values, found {flat.size}")
    return flat.astype(np.float64).reshape(frames, dims), meta


def save_matrix(path: str | Path, fm: FeatureMatrix) -> None:
    extra = dict(FEATURE_CONFIG) if fm.kind in ("mfb", "mfcc") else None
    save_array(path, fm.data, fm.kind, fm.rate_hz, extra=extra)


def load_matrix(path: str | Path) -> FeatureMatrix:
    data, meta = load_array(path)
    return FeatureMatrix(data, meta["kind"], int(meta["rate_hz"]))
