"""Deterministic one-step predictor: a small residual conv net trained on MSE.

The net predicts the delta to the last input frame, with a zero-initialized
final layer, so a fresh model is exactly the identity map. That keeps early
training stable and gives tests a sharp contract to check.

Forward passes exist in two flavors that execute the same kernel calls in the
same order (bitwise-equal outputs): a taped one for training and a plain
numpy one for inference.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .errors import NumericsError, ShapeError, TrainingDivergedError
from .optim import ParamSet, adam_step


@dataclass
class PredictorConfig:
    in_channels: int
    hidden_channels: int = 16
    n_conv_blocks: int = 3
    kernel_size: int = 3
    leaky_slope: float = 0.1
    context_frames: int = 1

    def __post_init__(self):
        if self.kernel_size % 2 == 0:
            raise ShapeError("PredictorConfig: kernel_size must be odd")
        if self.hidden_channels < 1:
            raise ShapeError("PredictorConfig: hidden_channels must be >= 1")
        if self.n_conv_blocks < 2:
            raise ShapeError("PredictorConfig: need at least first and final conv")
        if self.context_frames < 1:
            raise ShapeError("PredictorConfig: context_frames must be >= 1")


class Predictor:
    def __init__(self, config, params):
        self.config = config
        self.params = params


def kaiming_uniform(rng, shape, fan_in, slope):
    gain = np.sqrt(2.0 / (1.0 + slope * slope))
    bound = gain * np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_predictor(config, rng):
    """Kaiming-uniform conv stack with a zero final layer (identity at init)."""
    k = config.kernel_size
    cin = config.in_channels * config.context_frames
    hid = config.hidden_channels
    cout = config.in_channels
    params = ParamSet()
    widths = [cin] + [hid] * (config.n_conv_blocks - 1) + [cout]
    for i in range(config.n_conv_blocks):
        ci, co = widths[i], widths[i + 1]
        if i == config.n_conv_blocks - 1:
            w = np.zeros((co, ci, k, k))
        else:
            w = kaiming_uniform(rng, (co, ci, k, k), ci * k * k, config.leaky_slope)
        params.add(f"conv{i}.w", w)
        params.add(f"conv{i}.b", np.zeros(co))
    return Predictor(config, params)


def forward_t(model, x):
    """Taped forward on a [B, ctx*C, H, W] Tensor -> [B,C,H,W] Tensor."""
    cfg = model.config
    p = model.params
    h = x
    for i in range(cfg.n_conv_blocks):
        w = p[f"conv{i}.w"]
        b = p[f"conv{i}.b"]
        h = ad.add(ad.conv2d(h, w), ad.reshape(b, (1, b.shape[0], 1, 1)))
        if i < cfg.n_conv_blocks - 1:
            h = ad.leaky_relu(h, cfg.leaky_slope)
    last = ad.getitem(x, (slice(None), slice(-cfg.in_channels, None))) \
        if cfg.context_frames > 1 else x
    return ad.add(last, h)


def forward_np(model, x):
    """Inference forward on a [B, ctx*C, H, W] array; mirrors forward_t bitwise."""
    cfg = model.config
    p = model.params
    h = np.ascontiguousarray(x, dtype=np.float64)
    src = h
    for i in range(cfg.n_conv_blocks):
        w = p[f"conv{i}.w"].data
        b = p[f"conv{i}.b"].data
        h = kernels.conv2d_fwd(h, w) + b.reshape(1, b.shape[0], 1, 1)
        if i < cfg.n_conv_blocks - 1:
            h = np.where(h > 0.0, h, cfg.leaky_slope * h)
    last = src[:, -cfg.in_channels:] if cfg.context_frames > 1 else src
    out = last + h
    if not np.isfinite(out).all():
        raise NumericsError("predictor produced non-finite output")
    return out


def predict(model, x_t):
    """Single-step prediction on a [ctx*C, H, W] frame."""
    x = np.asarray(x_t, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"predict: expected [C,H,W], got {x.shape}")
    expected = model.config.in_channels * model.config.context_frames
    if x.shape[0] != expected:
        raise ShapeError(f"predict: expected {expected} channels, got {x.shape[0]}")
    return forward_np(model, x[None])[0]


def rollout(model, x_t, n_steps):
    """Autoregressive rollout; each prediction is fed back as the next input."""
    if n_steps < 1:
        raise ShapeError("rollout: n_steps must be >= 1")
    frames = np.empty((n_steps,) + tuple(np.shape(x_t)))
    cur = np.asarray(x_t, dtype=np.float64)
    for n in range(n_steps):
        cur = predict(model, cur)
        frames[n] = cur
    return frames


def single_step_pairs(trajs):
    """Stride-1 (frame, next frame) pairs from [n,T,C,H,W] trajectories."""
    arr = np.asarray(trajs, dtype=np.float64)
    n, t, c, h, w = arr.shape
    x = arr[:, :-1].reshape(n * (t - 1), c, h, w)
    y = arr[:, 1:].reshape(n * (t - 1), c, h, w)
    return x, y


@dataclass
class TrainReport:
    entries: list
    best_epoch: int
    best_val_loss: float
    val_loss_init: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True) + "\n"


def _val_loss(model, val_x, val_y, batch_size=64):
    total = 0.0
    n = val_x.shape[0]
    for lo in range(0, n, batch_size):
        xb = val_x[lo:lo + batch_size]
        pred = forward_np(model, xb)
        total += float(((pred - val_y[lo:lo + batch_size]) ** 2).mean()) * xb.shape[0]
    return total / n


def train_stage1(model, train_pairs, val_pairs, epochs, lr, batch_size,
                 early_stop_patience, rng, pairs_per_epoch=None):
    """Adam on single-step MSE with early stopping; keeps the best-val params.

    The initial state counts as a candidate checkpoint, so the retained model
    is never worse on validation than the untrained one.
    """
    if lr < 0.0:
        raise NumericsError("train_stage1: lr must be >= 0")
    train_x, train_y = train_pairs
    val_x, val_y = val_pairs
    if train_x.shape[0] == 0:
        raise ShapeError("train_stage1: empty dataset")

    val_init = _val_loss(model, val_x, val_y)
    best_val = val_init
    best_epoch = 0
    best_params = model.params.copy()
    entries = []
    stale = 0
    try:
        for epoch in range(1, epochs + 1):
            perm = rng.permutation(train_x.shape[0])
            if pairs_per_epoch is not None:
                perm = perm[:pairs_per_epoch]
            loss_sum = 0.0
            n_seen = 0
            for lo in range(0, perm.size, batch_size):
                idx = perm[lo:lo + batch_size]
                xb = Tensor(train_x[idx])
                yb = Tensor(train_y[idx])
                loss = ad.mse(forward_t(model, xb), yb)
                loss_sum += loss.item() * idx.size
                n_seen += idx.size
                if lr > 0.0:
                    ad.backward(loss)
                    adam_step(model.params, lr)
            val = _val_loss(model, val_x, val_y)
            entries.append({"epoch": epoch, "train_loss": loss_sum / max(n_seen, 1),
                            "val_loss": val})
            if val < best_val:
                best_val = val
                best_epoch = epoch
                best_params = model.params.copy()
                stale = 0
            else:
                stale += 1
                if stale >= early_stop_patience:
                    break
    except NumericsError as e:
        raise TrainingDivergedError(f"stage-1 training diverged: {e}")
    model.params.load_values(best_params)
    return TrainReport(entries, best_epoch, best_val, val_init)
