"""
D-Net: a small 1D-CNN + fully connected regressor of travelled distance per
IMU window, with hand-written forward/backward passes, Adam and a
reduce-on-plateau schedule.

Layout (defaults)::

    x [6 x 24] -> conv(7 filters, length 2) -> ReLU -> flatten(161) -> dropout(0.1)
               \\-> flatten(144) ------------------------------------------/ concat(305)
    -> fc(512) -> ReLU -> dropout(0.5) -> layernorm
    -> fc(32)  -> ReLU -> dropout(0.5) -> layernorm
    -> linear head -> distance [m]

All functions operate on batches ``x`` of shape (B, C, W); a single window of
shape (C, W) is promoted to a batch of one.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import DataError, NumericError

PARAM_ORDER = ("conv_w", "conv_b", "fc1_w", "fc1_b", "ln1_g", "ln1_b",
               "fc2_w", "fc2_b", "ln2_g", "ln2_b", "head_w", "head_b")

MAGIC = b"DNETWTS\x00"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DnetConfig:
    in_channels: int = 6
    window: int = 24
    conv_filters: int = 7
    kernel: int = 2
    fc1: int = 512
    fc2: int = 32
    out: int = 1
    dropout_flat: float = 0.1
    dropout_fc: float = 0.5
    lr0: float = 0.0025
    batch: int = 2048
    epochs: int = 300
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    min_lr: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    ln_eps: float = 1e-5
    val_fraction: float = 0.1
    val_block: int = 50
    standardize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.window < self.kernel:
            raise ValueError("window must be at least the kernel length")
        for name in ("dropout_flat", "dropout_fc", "plateau_factor"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if self.batch < 1 or self.epochs < 0:
            raise ValueError("batch must be >= 1 and epochs >= 0")

    @property
    def conv_len(self) -> int:
        return self.window - self.kernel + 1

    @property
    def concat_dim(self) -> int:
        return self.conv_filters * self.conv_len + self.in_channels * self.window

    def shapes(self) -> dict:
        return {
            "conv_w": (self.conv_filters, self.in_channels, self.kernel),
            "conv_b": (self.conv_filters,),
            "fc1_w": (self.fc1, self.concat_dim),
            "fc1_b": (self.fc1,),
            "ln1_g": (self.fc1,),
            "ln1_b": (self.fc1,),
            "fc2_w": (self.fc2, self.fc1),
            "fc2_b": (self.fc2,),
            "ln2_g": (self.fc2,),
            "ln2_b": (self.fc2,),
            "head_w": (self.out, self.fc2),
            "head_b": (self.out,),
        }

    @classmethod
    def from_dict(cls, d) -> "DnetConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class DnetWeights:
    params: dict
    cfg: DnetConfig = field(default_factory=DnetConfig)
    # optional per-channel input standardization
    x_mean: np.ndarray | None = None
    x_std: np.ndarray | None = None

    def __post_init__(self):
        shapes = self.cfg.shapes()
        for name in PARAM_ORDER:
            if name not in self.params:
                raise DataError(f"missing parameter {name}")
            arr = np.asarray(self.params[name], dtype=float)
            if arr.shape != shapes[name]:
                raise DataError(f"{name} has shape {arr.shape}, expected {shapes[name]}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite values")
            self.params[name] = arr

    def __getitem__(self, name) -> np.ndarray:
        return self.params[name]

    @property
    def n_params(self) -> int:
        return sum(self.params[k].size for k in PARAM_ORDER)

    def copy(self) -> "DnetWeights":
        return DnetWeights({k: v.copy() for k, v in self.params.items()}, self.cfg,
                           None if self.x_mean is None else self.x_mean.copy(),
                           None if self.x_std is None else self.x_std.copy())

    @classmethod
    def zeros(cls, cfg: DnetConfig = DnetConfig()) -> "DnetWeights":
        return cls({k: np.zeros(s) for k, s in cfg.shapes().items()}, cfg)

    @classmethod
    def init(cls, cfg: DnetConfig = DnetConfig(), rng=None) -> "DnetWeights":
        """Uniform fan-in initialization; layer norms start as identity."""
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        fan_in = {"conv": cfg.in_channels * cfg.kernel, "fc1": cfg.concat_dim,
                  "fc2": cfg.fc1, "head": cfg.fc2}
        p = {}
        for name, shape in cfg.shapes().items():
            layer = name.split("_")[0]
            if layer.startswith("ln"):
                p[name] = np.ones(shape) if name.endswith("_g") else np.zeros(shape)
            else:
                bound = 1.0 / math.sqrt(fan_in[layer])
                p[name] = rng.uniform(-bound, bound, size=shape)
        return cls(p, cfg)


# ---------------------------------------------------------------- layers

def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[None] if x.ndim == 2 else x


def conv1d_apply(x, k, b) -> np.ndarray:
    """Valid cross-correlation along time over all input channels, then ReLU.

    x: (B, C, W) or (C, W); k: (R, C, m); b: (R,) -> (B, R, W - m + 1),
    or (R, W - m + 1) for a single window.
    """
    x = np.asarray(x, dtype=float)
    out = relu_apply(_conv_linear(_as_batch(x), np.asarray(k, float), np.asarray(b, float)))
    return out[0] if x.ndim == 2 else out


def _conv_linear(x, k, b):
    if x.shape[1] != k.shape[1]:
        raise DataError(f"input has {x.shape[1]} channels, kernel expects {k.shape[1]}")
    m = k.shape[2]
    n_out = x.shape[2] - m + 1
    if n_out < 1:
        raise DataError("window shorter than kernel")
    z = np.zeros((x.shape[0], k.shape[0], n_out))
    for j in range(m):
        z += np.einsum("rc,bci->bri", k[:, :, j], x[:, :, j:j + n_out])
    return z + b[None, :, None]


def dense_apply(a, w, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != w.shape[1]:
        raise DataError(f"dense input has {a.shape[-1]} features, weights expect {w.shape[1]}")
    return a @ w.T + b


def relu_apply(z) -> np.ndarray:
    return np.maximum(z, 0.0)


def layer_norm_apply(z, gain, bias, eps=1e-5) -> np.ndarray:
    return _layer_norm(np.asarray(z, dtype=float), gain, bias, eps)[0]


def _layer_norm(z, gain, bias, eps):
    mu = z.mean(axis=-1, keepdims=True)
    var = z.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (z - mu) * inv
    return xhat * gain + bias, xhat, inv


def dropout_mask(shape, p, rng) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability p, else 1/(1-p)."""
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def dropout_apply(a, p, rng=None, mode="train") -> np.ndarray:
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    a = np.asarray(a, dtype=float)
    if mode == "infer" or p == 0.0:
        return a.copy()
    return a * dropout_mask(a.shape, p, rng)


# ----------------------------------------------------------- forward/backward

def dnet_forward(x, w: DnetWeights, mode="infer", rng=None, masks=None):
    """Forward pass.

    Parameters
    ----------
    x : (B, C, W) or (C, W) array
    mode : {"train", "infer"}
        Dropout is active only in training mode.
    rng : numpy Generator
        Source of dropout masks in training mode.
    masks : tuple of 3 arrays, optional
        Fixed dropout multipliers (flat, fc1, fc2); overrides ``rng``.

    Returns
    -------
    yhat : (B,) array
    cache : dict
        Intermediates needed by ``dnet_backward``.
    """
    cfg = w.cfg
    x = _as_batch(x)
    if x.shape[1:] != (cfg.in_channels, cfg.window):
        raise DataError(f"window shape {x.shape[1:]} does not match "
                        f"({cfg.in_channels}, {cfg.window})")
    if w.x_mean is not None:
        x = (x - w.x_mean[None, :, None]) / w.x_std[None, :, None]
    B = x.shape[0]
    p = w.params
    zc = _conv_linear(x, p["conv_w"], p["conv_b"])
    h0 = relu_apply(zc).reshape(B, -1)
    if mode == "train":
        if masks is None:
            if rng is None:
                raise ValueError("training mode needs an rng or fixed masks")
            masks = (dropout_mask(h0.shape, cfg.dropout_flat, rng),
                     dropout_mask((B, cfg.fc1), cfg.dropout_fc, rng),
                     dropout_mask((B, cfg.fc2), cfg.dropout_fc, rng))
    elif mode == "infer":
        masks = None
    else:
        raise ValueError(f"unknown mode {mode!r}")
    m0, m1, m2 = masks if masks is not None else (1.0, 1.0, 1.0)
    cat = np.concatenate([h0 * m0, x.reshape(B, -1)], axis=1)
    z1 = dense_apply(cat, p["fc1_w"], p["fc1_b"])
    n1, xh1, inv1 = _layer_norm(relu_apply(z1) * m1, p["ln1_g"], p["ln1_b"], cfg.ln_eps)
    z2 = dense_apply(n1, p["fc2_w"], p["fc2_b"])
    n2, xh2, inv2 = _layer_norm(relu_apply(z2) * m2, p["ln2_g"], p["ln2_b"], cfg.ln_eps)
    yhat = dense_apply(n2, p["head_w"], p["head_b"])[:, 0]
    cache = {"x": x, "zc": zc, "cat": cat, "z1": z1, "xh1": xh1, "inv1": inv1, "n1": n1,
             "z2": z2, "xh2": xh2, "inv2": inv2, "n2": n2, "masks": (m0, m1, m2),
             "weights": w, "yhat": yhat}
    return yhat, cache


def mae_loss(yhat, y) -> float:
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if yhat.size == 0:
        raise DataError("empty batch")
    if yhat.shape != y.shape:
        raise DataError("prediction and target batches differ in length")
    return float(np.mean(np.abs(y - yhat)))


def mae_grad(yhat, y) -> np.ndarray:
    """d(MAE)/d(yhat); the subgradient at zero residual is 0."""
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    return np.sign(yhat - np.asarray(y, dtype=float).reshape(-1)) / yhat.size


def _layer_norm_backward(dout, xhat, inv, gain):
    dxhat = dout * gain
    dz = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dz, (dout * xhat).sum(axis=0), dout.sum(axis=0)


def dnet_backward(cache, dy) -> dict:
    """Gradients of the loss with respect to every parameter.

    ``dy`` is d(loss)/d(yhat) per batch element, e.g. ``mae_grad(yhat, y)``.
    """
    if not cache or "weights" not in cache:
        raise ValueError("backward needs the cache of a forward pass")
    w = cache["weights"]
    cfg = w.cfg
    p = w.params
    dy = np.asarray(dy, dtype=float).reshape(-1)
    if dy.shape[0] != cache["yhat"].shape[0]:
        raise DataError("gradient batch does not match the cached forward pass")
    m0, m1, m2 = cache["masks"]
    g = {}
    g["head_w"] = (dy @ cache["n2"])[None, :]
    g["head_b"] = np.array([dy.sum()])
    dn2 = dy[:, None] * p["head_w"][0][None, :]
    dd2, g["ln2_g"], g["ln2_b"] = _layer_norm_backward(dn2, cache["xh2"], cache["inv2"], p["ln2_g"])
    dz2 = dd2 * m2 * (cache["z2"] > 0)
    g["fc2_w"] = dz2.T @ cache["n1"]
    g["fc2_b"] = dz2.sum(axis=0)
    dn1 = dz2 @ p["fc2_w"]
    dd1, g["ln1_g"], g["ln1_b"] = _layer_norm_backward(dn1, cache["xh1"], cache["inv1"], p["ln1_g"])
    dz1 = dd1 * m1 * (cache["z1"] > 0)
    g["fc1_w"] = dz1.T @ cache["cat"]
    g["fc1_b"] = dz1.sum(axis=0)
    n_conv = cfg.conv_filters * cfg.conv_len
    dh0 = (dz1 @ p["fc1_w"][:, :n_conv]) * m0
    zc = cache["zc"]
    dzc = dh0.reshape(zc.shape) * (zc > 0)
    x = cache["x"]
    gw = np.empty_like(p["conv_w"])
    for j in range(cfg.kernel):
        gw[:, :, j] = np.einsum("bri,bci->rc", dzc, x[:, :, j:j + cfg.conv_len])
    g["conv_w"] = gw
    g["conv_b"] = dzc.sum(axis=(0, 2))
    return g


# ----------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros_like(cls, w: DnetWeights) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in w.params.items()},
                   {k: np.zeros_like(a) for k, a in w.params.items()})


def adam_step(w: DnetWeights, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns new weights and state."""
    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for k, theta in w.params.items():
        g = grads[k]
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * g * g
        new_p[k] = theta - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k], new_v[k] = m, v
    return (DnetWeights(new_p, w.cfg, w.x_mean, w.x_std), AdamState(new_m, new_v, t))


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs
    without a new best loss; never go below ``min_lr``."""

    def __init__(self, lr0, factor=0.5, patience=10, min_lr=1e-6):
        self.lr = lr0
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.bad = 0

    def step(self, loss) -> float:
        if loss < self.best:
            self.best = loss
            self.bad = 0
        else:
            self.bad += 1
            if self.bad >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad = 0
        return self.lr


def plateau_scheduler(history, cfg: DnetConfig = DnetConfig()) -> float:
    """Learning rate after replaying a validation-loss history."""
    if len(history) == 0:
        raise ValueError("empty loss history")
    sched = PlateauScheduler(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr)
    lr = cfg.lr0
    for loss in history:
        lr = sched.step(loss)
    return lr


# ------------------------------------------------------------------ training

def predict(w: DnetWeights, X, batch=4096) -> np.ndarray:
    X = _as_batch(X)
    out = np.empty(X.shape[0])
    for i in range(0, X.shape[0], batch):
        out[i:i + batch] = dnet_forward(X[i:i + batch], w, "infer")[0]
    return out


def split_validation(n, fraction, block, rng):
    """Hold out whole contiguous blocks of windows.

    Windows adjacent to a held-out block are dropped from training because
    overlapping windows share samples.
    """
    n_blocks = max(1, math.ceil(n / block))
    n_val = max(1, int(round(fraction * n_blocks)))
    if n_blocks < 2:
        return np.arange(n), np.arange(n)
    chosen = np.sort(rng.choice(n_blocks, size=n_val, replace=False))
    is_val = np.zeros(n, dtype=bool)
    for b in chosen:
        is_val[b * block:(b + 1) * block] = True
    guard = is_val.copy()
    guard[1:] |= is_val[:-1]
    guard[:-1] |= is_val[1:]
    return np.flatnonzero(~guard), np.flatnonzero(is_val)


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.epochs, sort_keys=True).encode()).hexdigest()


def dnet_train(X, y, cfg: DnetConfig = DnetConfig(), X_val=None, y_val=None,
               progress=None, track_train_eval=False):
    """Mini-batch Adam training on MAE with a plateau schedule.

    When no validation set is given, ``cfg.val_fraction`` of the windows is
    held out in contiguous blocks; with too few windows the training set
    doubles as validation. Returns the weights of the best validation epoch
    and a ``TrainLog``. Deterministic for a given ``cfg.seed``.
    """
    X = _as_batch(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise DataError("empty training set")
    if X.shape[0] != y.shape[0]:
        raise DataError("windows and targets differ in count")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("training data contains non-finite values")
    ss = np.random.SeedSequence(cfg.seed)
    rng_init, rng_split, rng_shuffle, rng_drop = (np.random.default_rng(s) for s in ss.spawn(4))
    if X_val is None:
        if cfg.val_fraction > 0 and X.shape[0] >= 2 * cfg.val_block:
            tr, va = split_validation(X.shape[0], cfg.val_fraction, cfg.val_block, rng_split)
            X, y, X_val, y_val = X[tr], y[tr], X[va], y[va]
        else:
            X_val, y_val = X, y
    X_val = _as_batch(X_val)
    y_val = np.asarray(y_val, dtype=float).reshape(-1)

    w = DnetWeights.init(cfg, rng_init)
    if cfg.standardize:
        w.x_mean = X.mean(axis=(0, 2))
        w.x_std = X.std(axis=(0, 2)) + 1e-12
    state = AdamState.zeros_like(w)
    sched = PlateauScheduler(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr)
    lr = cfg.lr0
    log = TrainLog()
    best = w.copy()
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng_shuffle.permutation(n)
        total = 0.0
        for i in range(0, n, cfg.batch):
            idx = order[i:i + cfg.batch]
            yhat, cache = dnet_forward(X[idx], w, "train", rng_drop)
            total += mae_loss(yhat, y[idx]) * len(idx)
            grads = dnet_backward(cache, mae_grad(yhat, y[idx]))
            w, state = adam_step(w, grads, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        val = mae_loss(predict(w, X_val), y_val)
        if not math.isfinite(val):
            raise NumericError(f"validation loss became non-finite at epoch {epoch}")
        entry = {"epoch": epoch, "train_mae": total / n, "val_mae": val, "lr": lr}
        if track_train_eval:
            entry["train_mae_eval"] = mae_loss(predict(w, X), y)
        log.epochs.append(entry)
        if val < log.best_val:
            log.best_val, log.best_epoch = val, epoch
            best = w.copy()
        lr = sched.step(val)
        if progress is not None:
            progress(entry)
    return best, log


# ------------------------------------------------------------------ file i/o

def save_weights(path, w: DnetWeights, log: TrainLog | None = None):
    """Write the versioned container: magic, u32 version, u32 header length,
    JSON header, then float64 little-endian arrays in ``PARAM_ORDER``."""
    arrays = [(k, w.params[k]) for k in PARAM_ORDER]
    if w.x_mean is not None:
        arrays += [("x_mean", w.x_mean), ("x_std", w.x_std)]
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(w.cfg),
        "seed": w.cfg.seed,
        "order": [[k, list(a.shape)] for k, a in arrays],
        "training_log_digest": None if log is None else log.digest(),
        "best_epoch": None if log is None else log.best_epoch,
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(hb)))
        fh.write(hb)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_weights(path) -> DnetWeights:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path} is not a D-Net weights file")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<II", data, off)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported weights format version {version}")
    off += 8
    header = json.loads(data[off:off + hlen])
    off += hlen
    arrays = {}
    for name, shape in header["order"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if off + nbytes > len(data):
            raise DataError(f"weights file truncated while reading {name}")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += nbytes
    cfg = DnetConfig.from_dict(header["config"])
    x_mean = arrays.pop("x_mean", None)
    x_std = arrays.pop("x_std", None)
    return DnetWeights(arrays, cfg, x_mean, x_std)
