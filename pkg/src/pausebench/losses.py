"""Frame-wise training objectives, each returning value plus analytic gradient.

Every loss returns a LossOutput (value, grad) where grad is the exact
derivative with respect to the first argument, including the 1/N
averaging factor, so callers can feed it straight into backprop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

BCE_EPS = 1e-7


class LossOutput(NamedTuple):
    value: float
    grad: np.ndarray


def softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + exp(x)) without overflow for large |x|
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def huber_elementwise(err: np.ndarray, delta: float) -> np.ndarray:
    """Quadratic inside |e| <= delta, linear outside; the branches meet
    at delta^2/2 so value and slope are continuous."""
    abs_err = np.abs(err)
    quad = 0.5 * err * err
    lin = delta * (abs_err - 0.5 * delta)
    return np.where(abs_err <= delta, quad, lin)


def _as_error(pred, target) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    return pred - target


def huber_loss(pred: np.ndarray, target: np.ndarray, delta: float = 1.0) -> LossOutput:
    """Mean Huber loss over all elements.

    grad = clip(e, -delta, delta) / N with e = pred - target.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    err = _as_error(pred, target)
    n = err.size
    value = float(huber_elementwise(err, delta).sum() / n)
    grad = np.clip(err, -delta, delta) / n
    return LossOutput(value, grad)


@dataclass(frozen=True)
class DafParams:
    """Difficulty-weighted Huber settings: global scale, focal exponent,
    transition point, and per-class weights."""

    alpha: float = 1.0
    gamma: float = 2.0
    delta: float = 1.0
    class_weights: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if any(w <= 0 for w in self.class_weights.values()):
            raise ValueError("class weights must be positive")


def inverse_frequency_weights(labels: np.ndarray, n_classes: int = 4) -> dict[int, float]:
    """Class weights proportional to inverse frequency in labels.

    Scaled so the element-weighted mean over labels is exactly 1.
    Only classes present in labels get an entry.
    """
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels.ravel(), minlength=n_classes).astype(np.float64)
    present = np.flatnonzero(counts)
    if present.size == 0:
        raise ValueError("no labels given")
    # w_c = N / (n_present * count_c) makes sum_c count_c * w_c == N
    scale = labels.size / present.size
    return {int(c): float(scale / counts[c]) for c in present}


def daf_loss(
    pred: np.ndarray,
    target: np.ndarray,
    params: DafParams = DafParams(),
    class_of: np.ndarray | None = None,
) -> LossOutput:
    """Mean of alpha * w_c * (|e|/delta)^gamma * huber_delta(e).

    class_of holds the per-element class id used to look up w_c; omitted
    class ids (or class_of=None with empty weights) mean w = 1. With
    gamma=0, unit weights, and alpha=1 this reduces exactly to huber_loss
    (0^0 evaluates to 1 so e=0 elements are included). For gamma > 0 the
    gradient at e=0 is exactly 0.
    """
    err = _as_error(pred, target)
    n = err.size
    alpha, gamma, delta = params.alpha, params.gamma, params.delta
    if params.class_weights:
        if class_of is None:
            raise ValueError("class weights given but class_of missing")
        class_of = np.asarray(class_of, dtype=np.int64)
        if class_of.shape != err.shape:
            raise ValueError(f"class_of shape {class_of.shape} != error shape {err.shape}")
        missing = sorted(set(np.unique(class_of).tolist()) - set(params.class_weights))
        if missing:
            raise ValueError(f"no class weight for classes {missing}")
        table = np.zeros(max(params.class_weights) + 1, dtype=np.float64)
        for c, wc in params.class_weights.items():
            table[c] = wc
        w = table[class_of]
    else:
        w = np.ones_like(err)

    abs_err = np.abs(err)
    base = huber_elementwise(err, delta)
    focal = (abs_err / delta) ** gamma
    value = float((alpha * w * focal * base).sum() / n)

    grad = focal * np.clip(err, -delta, delta)
    if gamma > 0:
        # product rule term; masked so 0 * inf never appears at e = 0
        nz = abs_err > 0
        grad[nz] += gamma * (abs_err[nz] / delta) ** (gamma - 1.0) * np.sign(err[nz]) / delta * base[nz]
    grad *= alpha * w
    grad /= n
    return LossOutput(value, grad)


def ce_loss(logits: np.ndarray, target: np.ndarray) -> LossOutput:
    """Mean softmax cross-entropy over the last axis.

    logits: (..., C); target: (...) integer class ids in [0, C).
    grad = (softmax - onehot) / N where N counts label positions.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.int64)
    if logits.shape[:-1] != target.shape:
        raise ValueError(f"logits shape {logits.shape} does not index target shape {target.shape}")
    n_classes = logits.shape[-1]
    if target.size and (target.min() < 0 or target.max() >= n_classes):
        raise ValueError(f"target labels outside [0, {n_classes})")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    n = target.size
    onehot = np.zeros_like(logits)
    np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
    value = float(-(onehot * logp).sum() / n)
    grad = (np.exp(logp) - onehot) / n
    return LossOutput(value, grad)


def bce_loss(prob: np.ndarray, target: np.ndarray) -> LossOutput:
    """Mean binary cross-entropy over probabilities.

    prob is clamped to [eps, 1-eps] with eps=1e-7 before the log; grad is
    taken with respect to the clamped probability (0 where the clamp is
    active). target must be exactly 0 or 1.
    """
    prob = np.asarray(prob, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prob.shape != target.shape:
        raise ValueError(f"shape mismatch: prob {prob.shape} vs target {target.shape}")
    if not np.all((target == 0) | (target == 1)):
        raise ValueError("bce targets must be 0 or 1")
    p = np.clip(prob, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    value = float(-(target * np.log(p) + (1.0 - target) * np.log1p(-p)).sum() / n)
    grad = np.where(
        (prob > BCE_EPS) & (prob < 1.0 - BCE_EPS),
        (p - target) / (p * (1.0 - p)) / n,
        0.0,
    )
    return LossOutput(value, grad)
