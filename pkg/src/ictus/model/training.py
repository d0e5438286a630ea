"""Loss, reverse-mode gradients, Adam, and the training loop.

Gradients are computed by walking the forward tape backwards; the
absolute-difference junction of the similarity head uses sign(x) with
subgradient 0 at 0.  Training is a pure function of (data, spec, config):
shuffling and dropout streams derive from the config seed, and the best
validation-loss weights are returned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..dsp import PREICTAL_CLASS, WindowTensor
from ..errors import (
    DivergedError,
    FingerprintMismatchError,
    InvalidConfigError,
    ShapeMismatchError,
)
from . import layers
from .layers import sigmoid
from .network import (
    HEAD_SIAMESE,
    ArchitectureSpec,
    ModelParams,
    embed_batch,
    head_logits,
    init_params,
)

PRED_CLAMP = 1e-7
FINE_TUNE_LR_FACTOR = 0.1
VAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 50
    lr: float = 1e-3
    early_stop_patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 0 or self.early_stop_patience < 1:
            raise InvalidConfigError("batch_size/epochs/patience must be positive")
        if self.lr <= 0:
            raise InvalidConfigError("lr must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


def bce_loss(pred, label):
    """Binary cross-entropy with predictions clamped away from {0, 1}."""
    p = np.clip(np.asarray(pred, dtype=np.float64), PRED_CLAMP, 1.0 - PRED_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def _walk_tape(tape, d, params: ModelParams, grads: dict):
    """Propagate d backwards through a recorded forward tape."""
    t = params.tensors
    for entry in reversed(tape):
        kind = entry[0]
        if kind == "dropout":
            d = layers.dropout_backward(d, entry[1])
        elif kind == "relu":
            d = layers.relu_backward(d, entry[1])
        elif kind == "pool":
            d = layers.maxpool2_backward(d, entry[1])
        elif kind == "flatten":
            d = d.reshape(entry[1])
        elif kind == "dense":
            _, name, cache = entry
            d, dw, db = layers.dense_backward(d, cache, t[f"{name}_w"])
            grads[f"{name}_w"] = grads.get(f"{name}_w", 0) + dw
            grads[f"{name}_b"] = grads.get(f"{name}_b", 0) + db
        elif kind == "bn":
            _, i, cache = entry
            d, dgamma, dbeta = layers.batchnorm_backward(d, cache)
            grads[f"bn{i}_gamma"] = dgamma
            grads[f"bn{i}_beta"] = dbeta
        elif kind == "conv":
            _, i, cache = entry
            d, dw, db = layers.conv2d_backward(d, cache, t[f"conv{i}_w"])
            grads[f"conv{i}_w"] = dw
            grads[f"conv{i}_b"] = db
        else:  # pragma: no cover - tape entries are produced in this package
            raise AssertionError(f"unknown tape entry {kind}")
    return d


def _forward_backward(params: ModelParams, batch, targets, rng):
    """Mean-loss forward/backward on one batch.

    batch is (xa, xb) arrays for the siamese head or a single array for the
    classifier.  Returns (loss, grads, new_buffers).
    """
    dt = params.spec.np_dtype
    y = np.asarray(targets, dtype=np.float64)
    grads: dict[str, np.ndarray] = {}
    tape_f: list = []
    tape_g: list = []
    if params.spec.head == HEAD_SIAMESE:
        xa, xb = batch
        xa = np.asarray(xa, dtype=dt)
        xb = np.asarray(xb, dtype=dt)
        n = xa.shape[0]
        emb, buffers = embed_batch(params, np.concatenate([xa, xb]), True, rng, tape_f)
        diff = emb[:n] - emb[n:]
        feat = np.abs(diff)
        logits = head_logits(params, feat, True, rng, tape_g)
        p = sigmoid(logits.astype(np.float64))
        loss = float(bce_loss(p, y).mean())
        dlogit = ((p - y) / n).astype(dt)
        dfeat = _walk_tape(tape_g, dlogit[:, None], params, grads)
        ddiff = dfeat * np.sign(diff)
        _walk_tape(tape_f, np.concatenate([ddiff, -ddiff]), params, grads)
    else:
        x = np.asarray(batch, dtype=dt)
        n = x.shape[0]
        emb, buffers = embed_batch(params, x, True, rng, tape_f)
        logits = head_logits(params, emb, True, rng, tape_g)
        p = sigmoid(logits.astype(np.float64))
        loss = float(bce_loss(p, y).mean())
        dlogit = ((p - y) / n).astype(dt)
        demb = _walk_tape(tape_g, dlogit[:, None], params, grads)
        _walk_tape(tape_f, demb, params, grads)
    return loss, grads, buffers


def backward(params: ModelParams, batch, targets, mode: str = "train", dropout_seed=None):
    """Gradients of the mean batch loss for every trainable tensor."""
    if mode != "train":
        raise ValueError("gradients are defined for train mode")
    y = np.atleast_1d(np.asarray(targets))
    if y.size == 0:
        raise ValueError("batch must be nonempty")
    if params.spec.head == HEAD_SIAMESE:
        if not isinstance(batch, tuple) or len(batch) != 2:
            raise ShapeMismatchError("siamese batch must be a (xa, xb) tuple")
        xa, xb = (np.asarray(v) for v in batch)
        if xa.shape != xb.shape or xa.shape[0] != y.size:
            raise ShapeMismatchError("pair arrays and targets disagree")
        prepared = (xa, xb)
    else:
        x = np.asarray(batch)
        if x.shape[0] != y.size:
            raise ShapeMismatchError("inputs and targets disagree")
        prepared = x
    rng = np.random.default_rng(0 if dropout_seed is None else dropout_seed)
    _, grads, _ = _forward_backward(params, prepared, y, rng)
    return grads


# --- Adam ---------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: ModelParams, lr: float) -> AdamState:
    zeros = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return AdamState(m=zeros, v={k: np.zeros_like(v) for k, v in params.tensors.items()}, lr=lr)


def adam_step(params: ModelParams, grads: dict, state: AdamState):
    """One bias-corrected Adam update; pure in params and state."""
    if set(grads) != set(params.tensors):
        raise ShapeMismatchError("gradient keys do not match parameters")
    t = state.step + 1
    new_tensors, new_m, new_v = {}, {}, {}
    for k, p in params.tensors.items():
        g = np.asarray(grads[k], dtype=p.dtype)
        if g.shape != p.shape:
            raise ShapeMismatchError(f"{k}: gradient shape {g.shape} != {p.shape}")
        m = state.beta1 * state.m[k] + (1 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        new_tensors[k] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[k], new_v[k] = m, v
    next_params = ModelParams(spec=params.spec, tensors=new_tensors,
                              buffers=params.buffers, fingerprint=params.fingerprint)
    next_state = AdamState(m=new_m, v=new_v, step=t, lr=state.lr,
                           beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return next_params, next_state


# --- dataset plumbing ---------------------------------------------------

def _window_label(w: WindowTensor) -> float:
    return 1.0 if w.label in PREICTAL_CLASS else 0.0


def stack_pairs(pairs, dtype):
    xa = np.stack([p.a.values for p in pairs]).astype(dtype)
    xb = np.stack([p.b.values for p in pairs]).astype(dtype)
    y = np.array([1.0 if p.similar else 0.0 for p in pairs])
    return xa, xb, y


def stack_windows(windows, dtype):
    x = np.stack([w.values for w in windows]).astype(dtype)
    y = np.array([_window_label(w) for w in windows])
    return x, y


def _prepare(items, spec: ArchitectureSpec):
    items = list(items)
    if not items:
        raise ValueError("dataset must be nonempty")
    if spec.head == HEAD_SIAMESE:
        xa, xb, y = stack_pairs(items, spec.np_dtype)
        return (xa, xb), y
    x, y = stack_windows(items, spec.np_dtype)
    return x, y


def _slice(batch, idx):
    if isinstance(batch, tuple):
        return batch[0][idx], batch[1][idx]
    return batch[idx]


def _predict(params: ModelParams, batch) -> np.ndarray:
    """Inference-mode probabilities over a prepared dataset, in val batches."""
    n = batch[0].shape[0] if isinstance(batch, tuple) else batch.shape[0]
    out = np.empty(n, dtype=np.float64)
    for lo in range(0, n, VAL_BATCH):
        idx = slice(lo, min(lo + VAL_BATCH, n))
        part = _slice(batch, idx)
        if params.spec.head == HEAD_SIAMESE:
            xa, xb = part
            emb, _ = embed_batch(params, np.concatenate([xa, xb]), False, None)
            logits = head_logits(params, np.abs(emb[: xa.shape[0]] - emb[xa.shape[0]:]),
                                 False, None)
        else:
            emb, _ = embed_batch(params, part, False, None)
            logits = head_logits(params, emb, False, None)
        out[idx] = sigmoid(logits.astype(np.float64))
    return out


def _run_training(start: ModelParams, train_batch, train_y, val_batch, val_y,
                  cfg: TrainConfig, lr: float):
    n = train_y.shape[0]
    ss = np.random.SeedSequence(cfg.seed)
    shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in ss.spawn(2))

    params = start
    state = init_adam(params, lr)
    # the starting weights seed the best-seen pool, so fine-tuning can never
    # return something worse than what it was given
    best = params.copy()
    best_val = float(bce_loss(_predict(params, val_batch), val_y).mean())
    stale = 0
    history: list[EpochStats] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo: lo + cfg.batch_size]
            loss, grads, buffers = _forward_backward(
                params, _slice(train_batch, idx), train_y[idx], dropout_rng
            )
            if not np.isfinite(loss):
                raise DivergedError(f"non-finite training loss at epoch {epoch}")
            params, state = adam_step(params, grads, state)
            params = replace(params, buffers=buffers)
            losses.append((loss, len(idx)))
        train_loss = float(sum(l * w for l, w in losses) / n)

        val_p = _predict(params, val_batch)
        val_loss = float(bce_loss(val_p, val_y).mean())
        if not np.isfinite(val_loss):
            raise DivergedError(f"non-finite validation loss at epoch {epoch}")
        val_acc = float(((val_p > 0.5) == (val_y > 0.5)).mean())
        history.append(EpochStats(epoch, train_loss, val_loss, val_acc))

        if val_loss < best_val:
            best_val = val_loss
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return best, history


def train(train_items, val_items, spec: ArchitectureSpec, cfg: TrainConfig):
    """Train from a fresh initialization; returns (best params, history)."""
    train_batch, train_y = _prepare(train_items, spec)
    val_batch, val_y = _prepare(val_items, spec)
    start = init_params(spec, cfg.seed)
    return _run_training(start, train_batch, train_y, val_batch, val_y, cfg, cfg.lr)


def fine_tune(pretrained: ModelParams, train_items, val_items, cfg: TrainConfig,
              spec: ArchitectureSpec | None = None):
    """Continue training from existing weights at a reduced learning rate."""
    if pretrained.fingerprint != pretrained.spec.fingerprint():
        raise FingerprintMismatchError("weights do not match their own architecture")
    if spec is not None and spec.fingerprint() != pretrained.fingerprint:
        raise FingerprintMismatchError(
            f"expected architecture {spec.fingerprint()}, weights carry {pretrained.fingerprint}"
        )
    if cfg.max_epochs == 0:
        return pretrained, []
    train_batch, train_y = _prepare(train_items, pretrained.spec)
    val_batch, val_y = _prepare(val_items, pretrained.spec)
    return _run_training(pretrained, train_batch, train_y, val_batch, val_y,
                         cfg, cfg.lr * FINE_TUNE_LR_FACTOR)


def history_csv(history) -> str:
    lines = ["epoch,train_loss,val_loss,val_accuracy"]
    lines += [f"{h.epoch},{h.train_loss:.6f},{h.val_loss:.6f},{h.val_accuracy:.6f}"
              for h in history]
    return "\n".join(lines) + "\n"
