"""Frame-wise recurrent sequence models with hand-written backprop.

Cell convention, gates ordered [update | reset | candidate]:

    z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
    r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
    c_t = tanh(x_t W_c + (r_t * h_{t-1}) U_c + b_c)
    h_t = (1 - z_t) * c_t + z_t * h_{t-1}

With all parameters zero this gives h_t = h_{t-1} / 2 (sigmoid(0) = 0.5,
tanh(0) = 0), which the tests pin down as the cell's fingerprint.

All math is float64; checkpoints store float32. Input-to-hidden products
are hoisted out of the time loop as one big matrix multiply per scan.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureMatrix, fuse
from .losses import DafParams, bce_loss, ce_loss, daf_loss, huber_loss, sigmoid
from .protocol import BATCH_SIZE, LEARNING_RATE

HEAD_DIMS = {"classification": 4, "regression": 1, "binary": 1}

CHECKPOINT_MAGIC = b"PBCK"


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dim: int
    n_layers: int = 2
    bidirectional: bool = True
    head: str = "classification"
    conv_kernel: int = 0  # 0 disables the conv front-end
    conv_channels: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.input_dim <= 0 or self.hidden_dim <= 0 or self.n_layers <= 0:
            raise ValueError("input_dim, hidden_dim, n_layers must be positive")
        if self.head not in HEAD_DIMS:
            raise ValueError(f"head must be one of {sorted(HEAD_DIMS)}, got {self.head!r}")
        if self.conv_kernel:
            if self.conv_kernel % 2 == 0:
                raise ValueError("conv_kernel must be odd (same-length padding)")
            if self.conv_channels <= 0:
                raise ValueError("conv_channels must be positive when conv_kernel is set")

    @property
    def n_dirs(self) -> int:
        return 2 if self.bidirectional else 1

    @property
    def gru_input_dim(self) -> int:
        return self.conv_channels if self.conv_kernel else self.input_dim


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]

    def zero_like_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}


def _dir_names(cfg: ModelConfig):
    return ("f", "b") if cfg.bidirectional else ("f",)


def init_model(cfg: ModelConfig) -> Model:
    """Weights uniform in +-1/sqrt(fan_in), biases zero, all seed-driven."""
    rng = np.random.default_rng(cfg.seed)

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params: dict[str, np.ndarray] = {}
    if cfg.conv_kernel:
        params["conv.W"] = uniform((cfg.conv_kernel, cfg.input_dim, cfg.conv_channels),
                                   cfg.conv_kernel * cfg.input_dim)
        params["conv.b"] = np.zeros(cfg.conv_channels)
    H = cfg.hidden_dim
    for layer in range(cfg.n_layers):
        in_dim = cfg.gru_input_dim if layer == 0 else H * cfg.n_dirs
        for d in _dir_names(cfg):
            tag = f"gru{layer}.{d}"
            params[f"{tag}.W"] = uniform((in_dim, 3 * H), in_dim)
            params[f"{tag}.U"] = uniform((H, 3 * H), H)
            params[f"{tag}.b"] = np.zeros(3 * H)
    head_in = H * cfg.n_dirs
    params["head.W"] = uniform((head_in, HEAD_DIMS[cfg.head]), head_in)
    params["head.b"] = np.zeros(HEAD_DIMS[cfg.head])
    return Model(cfg, params)


def _scan(X_in, W, U, b, h0):
    """One direction of one layer. X_in: (N,T,F); h0: (N,H).

    Returns (h_seq, cache). The input projection for every step is one
    GEMM; only the recurrent products stay inside the loop.
    """
    N, T, _ = X_in.shape
    H = U.shape[0]
    XW = X_in @ W + b
    z_seq = np.empty((N, T, H))
    r_seq = np.empty((N, T, H))
    c_seq = np.empty((N, T, H))
    h_seq = np.empty((N, T, H))
    U_zr, U_c = U[:, :2 * H], U[:, 2 * H:]
    h = h0
    for t in range(T):
        zr = sigmoid(XW[:, t, :2 * H] + h @ U_zr)
        z, r = zr[:, :H], zr[:, H:]
        c = np.tanh(XW[:, t, 2 * H:] + (r * h) @ U_c)
        h = (1.0 - z) * c + z * h
        z_seq[:, t] = z
        r_seq[:, t] = r
        c_seq[:, t] = c
        h_seq[:, t] = h
    return h_seq, {"z": z_seq, "r": r_seq, "c": c_seq, "h": h_seq, "h0": h0, "X_in": X_in}


def _scan_backward(W, U, cache, dH_seq):
    """Reverse-mode pass matching _scan. Returns (dW, dU, db, dX_in)."""
    z_seq, r_seq, c_seq, h_seq = cache["z"], cache["r"], cache["c"], cache["h"]
    h0, X_in = cache["h0"], cache["X_in"]
    N, T, H = z_seq.shape
    U_zr, U_c = U[:, :2 * H], U[:, 2 * H:]
    dG = np.empty((N, T, 3 * H))
    dU = np.zeros_like(U)
    dh = np.zeros((N, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dH_seq[:, t]
        z, r, c = z_seq[:, t], r_seq[:, t], c_seq[:, t]
        h_prev = h_seq[:, t - 1] if t > 0 else h0
        dc_pre = dh * (1.0 - z) * (1.0 - c * c)
        dz_pre = dh * (h_prev - c) * z * (1.0 - z)
        d_rh = dc_pre @ U_c.T
        dr_pre = d_rh * h_prev * r * (1.0 - r)
        dzr_pre = np.concatenate([dz_pre, dr_pre], axis=1)
        dh = dh * z + d_rh * r + dzr_pre @ U_zr.T
        dG[:, t, :2 * H] = dzr_pre
        dG[:, t, 2 * H:] = dc_pre
        dU[:, :2 * H] += h_prev.T @ dzr_pre
        dU[:, 2 * H:] += (r * h_prev).T @ dc_pre
    F = X_in.shape[2]
    dW = X_in.reshape(N * T, F).T @ dG.reshape(N * T, 3 * H)
    db = dG.sum(axis=(0, 1))
    dX_in = dG @ W.T
    return dW, dU, db, dX_in


def _conv_forward(X, W, b):
    """Same-length 1-D convolution over time with ReLU."""
    N, T, _ = X.shape
    K = W.shape[0]
    pad = K // 2
    Xpad = np.pad(X, ((0, 0), (pad, pad), (0, 0)))
    pre = np.zeros((N, T, W.shape[2]))
    for k in range(K):
        pre += Xpad[:, k:k + T] @ W[k]
    pre += b
    return np.maximum(pre, 0.0), {"Xpad": Xpad, "mask": pre > 0}


def _conv_backward(W, cache, dA):
    Xpad, mask = cache["Xpad"], cache["mask"]
    N, T, _ = dA.shape
    K = W.shape[0]
    pad = K // 2
    dpre = dA * mask
    dW = np.zeros_like(W)
    dXpad = np.zeros_like(Xpad)
    C = W.shape[2]
    for k in range(K):
        Xk = Xpad[:, k:k + T]
        dW[k] = Xk.reshape(N * T, -1).T @ dpre.reshape(N * T, C)
        dXpad[:, k:k + T] += dpre @ W[k].T
    db = dpre.sum(axis=(0, 1))
    return dW, db, dXpad[:, pad:pad + T]


def forward_batch(model: Model, X: np.ndarray, h0: np.ndarray | None = None):
    """X: (N,T,F). Returns (output, cache).

    classification -> (N,T,4) logits; regression -> (N,T) reals;
    binary -> (N,T) probabilities.
    """
    cfg = model.config
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != cfg.input_dim:
        raise ValueError(f"expected (N, T, {cfg.input_dim}) input, got {X.shape}")
    N, T, _ = X.shape
    H = cfg.hidden_dim
    cache: dict = {"layers": []}
    cur = X
    if cfg.conv_kernel:
        cur, conv_cache = _conv_forward(cur, model.params["conv.W"], model.params["conv.b"])
        cache["conv"] = conv_cache
    if h0 is None:
        h0 = np.zeros((cfg.n_layers, cfg.n_dirs, H))
    h0 = np.asarray(h0, dtype=np.float64)
    for layer in range(cfg.n_layers):
        outs = []
        layer_cache = {}
        for di, d in enumerate(_dir_names(cfg)):
            tag = f"gru{layer}.{d}"
            X_dir = cur if d == "f" else cur[:, ::-1]
            init = np.broadcast_to(h0[layer, di], (N, H))
            h_seq, sc = _scan(X_dir, model.params[f"{tag}.W"], model.params[f"{tag}.U"],
                              model.params[f"{tag}.b"], init)
            outs.append(h_seq if d == "f" else h_seq[:, ::-1])
            layer_cache[d] = sc
        cur = np.concatenate(outs, axis=2) if len(outs) > 1 else outs[0]
        cache["layers"].append(layer_cache)
    cache["head_in"] = cur
    pre = cur @ model.params["head.W"] + model.params["head.b"]
    if cfg.head == "classification":
        out = pre
    elif cfg.head == "regression":
        out = pre[..., 0]
    else:
        out = sigmoid(pre[..., 0])
        cache["binary_p"] = out
    return out, cache


def backward_batch(model: Model, cache: dict, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of a scalar loss with respect to every parameter, given
    the loss gradient with respect to the model output (probabilities
    for the binary head, raw outputs otherwise)."""
    cfg = model.config
    if cfg.head == "classification":
        d_pre = np.asarray(d_out, dtype=np.float64)
    elif cfg.head == "regression":
        d_pre = np.asarray(d_out, dtype=np.float64)[..., None]
    else:
        p = cache["binary_p"]
        d_pre = (np.asarray(d_out, dtype=np.float64) * p * (1.0 - p))[..., None]
    head_in = cache["head_in"]
    N, T, Fh = head_in.shape
    K = d_pre.shape[2]
    grads: dict[str, np.ndarray] = {}
    grads["head.W"] = head_in.reshape(N * T, Fh).T @ d_pre.reshape(N * T, K)
    grads["head.b"] = d_pre.sum(axis=(0, 1))
    dH = d_pre @ model.params["head.W"].T

    H = cfg.hidden_dim
    for layer in range(cfg.n_layers - 1, -1, -1):
        layer_cache = cache["layers"][layer]
        dX_total = None
        for di, d in enumerate(_dir_names(cfg)):
            tag = f"gru{layer}.{d}"
            dH_dir = dH[:, :, di * H:(di + 1) * H]
            if d == "b":
                dH_dir = dH_dir[:, ::-1]
            dW, dU, db, dX_in = _scan_backward(model.params[f"{tag}.W"],
                                               model.params[f"{tag}.U"],
                                               layer_cache[d], dH_dir)
            if d == "b":
                dX_in = dX_in[:, ::-1]
            grads[f"{tag}.W"] = dW
            grads[f"{tag}.U"] = dU
            grads[f"{tag}.b"] = db
            dX_total = dX_in if dX_total is None else dX_total + dX_in
        dH = dX_total
    if cfg.conv_kernel:
        dWc, dbc, _ = _conv_backward(model.params["conv.W"], cache["conv"], dH)
        grads["conv.W"] = dWc
        grads["conv.b"] = dbc
    return grads


def forward(model: Model, X, h0: np.ndarray | None = None) -> np.ndarray:
    """Single-sequence forward: X is T x F (or a FeatureMatrix)."""
    data = getattr(X, "data", X)
    out, _ = forward_batch(model, np.asarray(data, dtype=np.float64)[None], h0=h0)
    return out[0]


class Adam:
    """Adaptive-moment optimizer, decay 0.9/0.999, eps 1e-8."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = BATCH_SIZE
    learning_rate: float = LEARNING_RATE
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    loss: dict = field(default_factory=lambda: {"loss": "ce"})

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        name = self.loss.get("loss", "ce")
        if name not in ("ce", "huber", "daf", "bce"):
            raise ValueError(f"unknown loss {name!r}")


LOSS_FOR_HEAD = {"classification": ("ce",), "regression": ("huber", "daf"), "binary": ("bce",)}


def _loss_and_grad(head: str, loss_cfg: dict, out: np.ndarray, targets: np.ndarray):
    name = loss_cfg.get("loss", "ce")
    if name not in LOSS_FOR_HEAD[head]:
        raise ValueError(f"loss {name!r} does not fit head {head!r}")
    if name == "ce":
        return ce_loss(out, targets)
    if name == "huber":
        return huber_loss(out, targets, delta=loss_cfg.get("delta", 1.0))
    if name == "daf":
        weights = loss_cfg.get("class_weights") or {}
        params = DafParams(
            alpha=loss_cfg.get("alpha", 1.0),
            gamma=loss_cfg.get("gamma", 2.0),
            delta=loss_cfg.get("delta", 1.0),
            class_weights={int(k): float(v) for k, v in weights.items()},
        )
        return daf_loss(out, targets, params, class_of=np.asarray(targets, dtype=np.int64))
    return bce_loss(out, targets)


def _dataset_loss(model: Model, X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> float:
    total = 0.0
    n = X.shape[0]
    for start in range(0, n, cfg.batch_size):
        xb = X[start:start + cfg.batch_size]
        yb = y[start:start + cfg.batch_size]
        out, _ = forward_batch(model, xb)
        value, _ = _loss_and_grad(model.config.head, cfg.loss, out, yb)
        total += value * xb.shape[0]
    return total / n


def train(model: Model, train_data, val_data, cfg: TrainConfig = TrainConfig()):
    """Mini-batch training with early stopping on validation loss.

    train_data/val_data: (X, y) with X (N,T,F). Returns (best model,
    history); history carries per-epoch train/val losses and the epoch
    whose weights were kept. Fixed seed gives bit-identical histories
    in single-threaded runs.
    """
    X_train, y_train = train_data
    X_val, y_val = val_data
    if X_train.shape[0] == 0 or X_val.shape[0] == 0:
        raise ValueError("train and validation sets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    params = {k: v.copy() for k, v in model.params.items()}
    work = Model(model.config, params)
    opt = Adam(params, lr=cfg.learning_rate)

    best_val = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    best_epoch = -1
    history = {"train_loss": [], "val_loss": []}
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(X_train.shape[0])
        epoch_loss = 0.0
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out, fcache = forward_batch(work, X_train[idx])
            value, d_out = _loss_and_grad(work.config.head, cfg.loss, out, y_train[idx])
            if not np.isfinite(value):
                raise RuntimeError(
                    f"loss became non-finite at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            grads = backward_batch(work, fcache, d_out)
            opt.step(work.params, grads)
            epoch_loss += value * idx.size
        history["train_loss"].append(epoch_loss / order.size)
        val_loss = _dataset_loss(work, X_val, y_val, cfg)
        history["val_loss"].append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in work.params.items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    history["best_epoch"] = best_epoch
    return Model(model.config, best_params), history


def stage1_detect(detector: Model, acoustic) -> np.ndarray:
    """Frame-wise pause probabilities from a binary-head model."""
    if detector.config.head != "binary":
        raise ValueError("stage-1 detector must use the binary head")
    omega = forward(detector, acoustic)
    return np.clip(omega, 0.0, 1.0)


def reweight(omega: np.ndarray, acoustic: FeatureMatrix, emb: FeatureMatrix) -> FeatureMatrix:
    """Row-wise soft weighting of the fused matrix: row t -> omega_t * [A;E].

    omega of exactly 1 everywhere reproduces fuse(acoustic, emb)
    bit-identically (multiplication by 1.0 is exact).
    """
    omega = np.asarray(omega, dtype=np.float64)
    fused = fuse(acoustic, emb)
    if omega.ndim != 1 or omega.size != fused.frames:
        raise ValueError(f"omega length {omega.shape} does not match {fused.frames} frames")
    if omega.min() < 0.0 or omega.max() > 1.0:
        raise ValueError("omega values must be in [0, 1]")
    return FeatureMatrix(fused.data * omega[:, None], "fused")


def save_checkpoint(path: str | Path, model: Model) -> None:
    """Magic + JSON header (config, shapes, seed) + flat float32 blob."""
    order = sorted(model.params)
    header = {
        "config": asdict(model.config),
        "param_order": [[k, list(model.params[k].shape)] for k in order],
        "dtype": "<f4",
    }
    header_bytes = json.dumps(header).encode()
    blob = b"".join(np.ascontiguousarray(model.params[k], dtype="<f4").tobytes() for k in order)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(np.array(len(header_bytes), dtype="<u4").tobytes())
        fh.write(header_bytes)
        fh.write(blob)


def load_checkpoint(path: str | Path) -> Model:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    hlen = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
    header = json.loads(raw[8:8 + hlen].decode())
    cfg = ModelConfig(**header["config"])
    params: dict[str, np.ndarray] = {}
    offset = 8 + hlen
    for name, shape in header["param_order"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        params[name] = arr.astype(np.float64).reshape(shape)
        offset += count * 4
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after parameter blob")
    return Model(cfg, params)
