"""Exertion-level classification: binary clustering of the 1-5 scale,
temporal pooling, and a rank-consistent ordinal head.

The head shares one weight vector across K-1 threshold classifiers and
orders their biases by construction, so the threshold probabilities are
non-increasing for every input and the count-above-half decoding rule
is always well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import BCE_EPS, LossOutput, sigmoid, softplus

LOW_LABEL = "low"
HIGH_LABEL = "high"


@dataclass(frozen=True)
class ExertionLabel:
    raw_level: int
    binary: str

    def __post_init__(self):
        if not 1 <= self.raw_level <= 5:
            raise ValueError(f"raw_level must be in [1, 5], got {self.raw_level}")
        if self.binary not in (LOW_LABEL, HIGH_LABEL):
            raise ValueError(f"binary must be {LOW_LABEL!r} or {HIGH_LABEL!r}")


def cluster_exertion(raw: int) -> ExertionLabel:
    """Levels 1-2 cluster to low, 3-5 to high."""
    raw = int(raw)
    if not 1 <= raw <= 5:
        raise ValueError(f"exertion level must be in [1, 5], got {raw}")
    return ExertionLabel(raw, LOW_LABEL if raw <= 2 else HIGH_LABEL)


def pool_features(X) -> np.ndarray:
    """Temporal mean over rows; permutation of rows never changes it."""
    data = getattr(X, "data", X)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("need a non-empty T x F matrix")
    return data.mean(axis=0)


def ordinal_targets(levels: np.ndarray, n_levels: int) -> np.ndarray:
    """Expand 1-based levels into cumulative binary targets.

    Output (N, n_levels-1): column k-1 is 1 where level > k; rows are
    non-increasing left to right by construction.
    """
    levels = np.asarray(levels, dtype=np.int64)
    if levels.size and (levels.min() < 1 or levels.max() > n_levels):
        raise ValueError(f"levels must be in [1, {n_levels}]")
    ks = np.arange(1, n_levels)
    return (levels[:, None] > ks[None, :]).astype(np.float64)


def coral_loss(probs: np.ndarray, targets: np.ndarray) -> LossOutput:
    """Ordinal loss: mean over rows of summed per-threshold binary
    cross-entropies; gradient is with respect to the probabilities.

    Probabilities are clamped to [eps, 1-eps] before the log. With a
    single threshold column this equals bce_loss on the same inputs.
    Targets must be a valid cumulative encoding: binary and
    non-increasing along each row.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.ndim != 2 or probs.shape != targets.shape:
        raise ValueError("probs and targets must be matching 2-D arrays")
    if not np.all((targets == 0) | (targets == 1)):
        raise ValueError("targets must be 0 or 1")
    if np.any(np.diff(targets, axis=1) > 0):
        raise ValueError("targets must be non-increasing along each row (cumulative encoding)")
    n = probs.shape[0]
    p = np.clip(probs, BCE_EPS, 1.0 - BCE_EPS)
    value = float(-(targets * np.log(p) + (1.0 - targets) * np.log1p(-p)).sum() / n)
    grad = np.where(
        (probs > BCE_EPS) & (probs < 1.0 - BCE_EPS),
        (p - targets) / (p * (1.0 - p)) / n,
        0.0,
    )
    return LossOutput(value, grad)


def ordered_biases(raw: np.ndarray) -> np.ndarray:
    """Map free parameters to a non-increasing bias vector.

    b_1 = raw[0]; b_k = b_1 - cumsum(softplus(raw[1:])). Applied to
    shared logits this keeps threshold probabilities ordered
    p_1 >= p_2 >= ... for every input.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise ValueError("raw bias parameters must be a non-empty vector")
    b = np.empty_like(raw)
    b[0] = raw[0]
    if raw.size > 1:
        b[1:] = raw[0] - np.cumsum(softplus(raw[1:]))
    return b


def ordered_biases_grad(raw: np.ndarray, grad_b: np.ndarray) -> np.ndarray:
    """Backprop through ordered_biases: dL/draw from dL/db."""
    raw = np.asarray(raw, dtype=np.float64)
    grad_b = np.asarray(grad_b, dtype=np.float64)
    grad_raw = np.empty_like(raw)
    grad_raw[0] = grad_b.sum()
    if raw.size > 1:
        # raw[j] (j >= 1) feeds every b_k with k >= j through -softplus
        tail = np.cumsum(grad_b[::-1])[::-1]
        grad_raw[1:] = -sigmoid(raw[1:]) * tail[1:]
    return grad_raw


@dataclass
class CoralHead:
    """Shared-weight ordinal classifier over pooled feature vectors."""

    weight: np.ndarray
    raw_bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.raw_bias = np.asarray(self.raw_bias, dtype=np.float64)
        if self.weight.ndim != 1 or self.raw_bias.ndim != 1 or self.raw_bias.size < 1:
            raise ValueError("weight must be (F,), raw_bias (K-1,) with K >= 2")

    @property
    def n_levels(self) -> int:
        return self.raw_bias.size + 1

    @property
    def biases(self) -> np.ndarray:
        return ordered_biases(self.raw_bias)

    def logits(self, pooled: np.ndarray) -> np.ndarray:
        pooled = np.atleast_2d(np.asarray(pooled, dtype=np.float64))
        if pooled.shape[1] != self.weight.size:
            raise ValueError(f"expected {self.weight.size} features, got {pooled.shape[1]}")
        return pooled @ self.weight[:, None] + self.biases[None, :]

    def probabilities(self, pooled: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(pooled))


def init_coral_head(n_features: int, n_levels: int, seed: int = 0) -> CoralHead:
    if n_levels < 2:
        raise ValueError("need at least 2 levels")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(n_features)
    return CoralHead(
        weight=rng.uniform(-bound, bound, size=n_features),
        raw_bias=np.zeros(n_levels - 1),
    )


def coral_predict(head: CoralHead, pooled: np.ndarray) -> int:
    """Decode one pooled vector: 1 + #{k : p_k > 0.5}."""
    logits = head.logits(np.asarray(pooled, dtype=np.float64).reshape(1, -1))
    return int(1 + (logits[0] > 0).sum())


def coral_predict_batch(head: CoralHead, pooled: np.ndarray) -> np.ndarray:
    return 1 + (head.logits(pooled) > 0).sum(axis=1).astype(np.int64)


def train_coral_head(
    X: np.ndarray,
    levels: np.ndarray,
    n_levels: int,
    epochs: int = 200,
    lr: float = 0.05,
    seed: int = 0,
) -> tuple[CoralHead, list[float]]:
    """Fit the ordinal head with adaptive-moment updates on full batches.

    Returns the head and the per-epoch loss history.
    """
    from .models import Adam

    X = np.asarray(X, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != levels.size or X.shape[0] == 0:
        raise ValueError("X must be (N, F) with one level per row")
    targets = ordinal_targets(levels, n_levels)
    head = init_coral_head(X.shape[1], n_levels, seed)
    params = {"weight": head.weight, "raw_bias": head.raw_bias}
    opt = Adam(params, lr=lr)
    n = X.shape[0]
    history = []
    for _ in range(epochs):
        z = X @ params["weight"][:, None] + ordered_biases(params["raw_bias"])[None, :]
        p = sigmoid(z)
        value = coral_loss(p, targets).value
        dz = (p - targets) / n
        grads = {
            "weight": X.T @ dz.sum(axis=1),
            "raw_bias": ordered_biases_grad(params["raw_bias"], dz.sum(axis=0)),
        }
        opt.step(params, grads)
        history.append(value)
    return CoralHead(params["weight"], params["raw_bias"]), history
