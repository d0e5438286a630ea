"""Architecture description, parameter container, and forward passes.

The base network stacks stride-1 'same' convolutions (each followed by
batch norm and ReLU, with 2x2 max pooling after the configured layers and
dropout at the end of every block), then a dense embedding layer with ReLU.

Two heads share that embedding network:
  * similarity: the absolute difference of two embeddings runs through a
    small dense stack and a final unit whose sigmoid is the similarity
    score of the two inputs;
  * classifier: a single dense unit on the embedding, sigmoid output.

All weights live in a flat name->array dict so the optimizer, the gradient
audit, and serialization can treat parameters uniformly.  Batch-norm
running statistics are state, not parameters, and live in a separate
buffer dict.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from ..dsp import WindowTensor
from ..errors import BadSpecError, ShapeMismatchError, WrongHeadError
from . import layers
from .layers import sigmoid

HEAD_SIAMESE = "siamese"
HEAD_CLASSIFIER = "classifier"


@dataclass(frozen=True)
class ArchitectureSpec:
    input_channels: int
    input_time: int = 128
    input_scales: int = 10
    conv_filters: tuple[int, ...] = (16, 16, 32, 32, 64, 64)
    kernel_size: int = 3
    pool_after: tuple[int, ...] = (2, 4, 6)
    embed_dim: int = 128
    head: str = HEAD_SIAMESE
    g_hidden: tuple[int, ...] = (250, 100)
    # 0.1 measured as the largest rate at which both heads still converge on
    # desk-scale (single-seizure) training sets; see README notes
    dropout_rate: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "conv_filters", tuple(int(f) for f in self.conv_filters))
        object.__setattr__(self, "pool_after", tuple(int(i) for i in self.pool_after))
        object.__setattr__(self, "g_hidden", tuple(int(h) for h in self.g_hidden))
        if self.input_channels < 1 or self.input_time < 1 or self.input_scales < 1:
            raise BadSpecError("input dimensions must be positive")
        if not self.conv_filters or any(f < 1 for f in self.conv_filters):
            raise BadSpecError("conv_filters must be a non-empty tuple of positive ints")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise BadSpecError("kernel_size must be odd and positive")
        n = len(self.conv_filters)
        if any(not 1 <= i <= n for i in self.pool_after) or \
                len(set(self.pool_after)) != len(self.pool_after):
            raise BadSpecError("pool_after must be distinct 1-based conv layer indices")
        if self.embed_dim < 1:
            raise BadSpecError("embed_dim must be positive")
        if self.head not in (HEAD_SIAMESE, HEAD_CLASSIFIER):
            raise BadSpecError(f"unknown head {self.head!r}")
        if any(h < 1 for h in self.g_hidden):
            raise BadSpecError("g_hidden sizes must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise BadSpecError("dropout_rate must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise BadSpecError("dtype must be float32 or float64")
        h, w = self.input_time, self.input_scales
        for i in range(1, n + 1):
            if i in self.pool_after:
                h, w = h // 2, w // 2
            if h < 1 or w < 1:
                raise BadSpecError(f"spatial dims collapse to zero after layer {i}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def feature_shape(self) -> tuple[int, int, int]:
        h, w = self.input_time, self.input_scales
        for i in range(1, len(self.conv_filters) + 1):
            if i in self.pool_after:
                h, w = h // 2, w // 2
        return self.conv_filters[-1], h, w

    @property
    def flat_dim(self) -> int:
        f, h, w = self.feature_shape()
        return f * h * w

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ModelParams:
    spec: ArchitectureSpec
    tensors: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    fingerprint: str = ""

    def __post_init__(self):
        if not self.fingerprint:
            self.fingerprint = self.spec.fingerprint()

    def copy(self) -> "ModelParams":
        return ModelParams(
            spec=self.spec,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
            fingerprint=self.fingerprint,
        )


def expected_shapes(spec: ArchitectureSpec) -> tuple[dict, dict]:
    """Shape maps for trainable tensors and batch-norm buffers."""
    k = spec.kernel_size
    tensors: dict[str, tuple] = {}
    buffers: dict[str, tuple] = {}
    c_in = spec.input_channels
    for i, f in enumerate(spec.conv_filters, 1):
        tensors[f"conv{i}_w"] = (f, c_in, k, k)
        tensors[f"conv{i}_b"] = (f,)
        tensors[f"bn{i}_gamma"] = (f,)
        tensors[f"bn{i}_beta"] = (f,)
        buffers[f"bn{i}_mean"] = (f,)
        buffers[f"bn{i}_var"] = (f,)
        c_in = f
    tensors["embed_w"] = (spec.flat_dim, spec.embed_dim)
    tensors["embed_b"] = (spec.embed_dim,)
    if spec.head == HEAD_SIAMESE:
        dims = (spec.embed_dim,) + spec.g_hidden + (1,)
        for j in range(len(dims) - 1):
            tensors[f"g{j + 1}_w"] = (dims[j], dims[j + 1])
            tensors[f"g{j + 1}_b"] = (dims[j + 1],)
    else:
        tensors["cls_w"] = (spec.embed_dim, 1)
        tensors["cls_b"] = (1,)
    return tensors, buffers


def init_params(spec: ArchitectureSpec, seed: int = 0) -> ModelParams:
    """He-scaled weights, zero biases, unit batch-norm; deterministic per seed."""
    rng = np.random.default_rng(seed)
    dt = spec.np_dtype
    tensor_shapes, buffer_shapes = expected_shapes(spec)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes.items():
        if name.endswith("_w"):
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            tensors[name] = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dt)
        elif "gamma" in name:
            tensors[name] = np.ones(shape, dtype=dt)
        else:
            tensors[name] = np.zeros(shape, dtype=dt)
    buffers = {
        name: (np.ones(shape, dtype=dt) if name.endswith("_var") else np.zeros(shape, dtype=dt))
        for name, shape in buffer_shapes.items()
    }
    return ModelParams(spec=spec, tensors=tensors, buffers=buffers)


def _as_batch(x, spec: ArchitectureSpec) -> tuple[np.ndarray, bool]:
    if isinstance(x, WindowTensor):
        x = x.values
    arr = np.asarray(x, dtype=spec.np_dtype)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    want = (spec.input_channels, spec.input_time, spec.input_scales)
    if arr.ndim != 4 or arr.shape[1:] != want:
        raise ShapeMismatchError(f"expected input shape {want}, got {arr.shape[1:]}")
    return arr, single


def embed_batch(params: ModelParams, x: np.ndarray, train: bool,
                rng: np.random.Generator | None, tape: list | None = None):
    """Run the base network on a (B, C, H, W) batch -> (B, embed_dim).

    Returns (embeddings, updated buffer dict).  When `tape` is given every
    op's cache is appended for the backward pass.
    """
    spec = params.spec
    t = params.tensors
    rate = spec.dropout_rate if train else 0.0
    new_buffers = dict(params.buffers)
    recording = tape is not None  # gradient tape implies train mode
    # layers run channels-last; the public layout stays (B, C, H, W)
    h = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    for i in range(1, len(spec.conv_filters) + 1):
        if train:
            h, cache = layers.conv2d(h, t[f"conv{i}_w"], t[f"conv{i}_b"])
            if recording:
                tape.append(("conv", i, cache))
            h, bn_cache, rm, rv = layers.batchnorm(
                h, t[f"bn{i}_gamma"], t[f"bn{i}_beta"],
                params.buffers[f"bn{i}_mean"], params.buffers[f"bn{i}_var"], train,
            )
            new_buffers[f"bn{i}_mean"], new_buffers[f"bn{i}_var"] = rm, rv
            if recording:
                tape.append(("bn", i, bn_cache))
        else:
            # inference folds the frozen batch norm into the conv itself
            w_eff, b_eff = layers.bn_fold(
                t[f"conv{i}_w"], t[f"conv{i}_b"], t[f"bn{i}_gamma"], t[f"bn{i}_beta"],
                params.buffers[f"bn{i}_mean"], params.buffers[f"bn{i}_var"],
            )
            h, _ = layers.conv2d(h, w_eff, b_eff)
        h, mask = layers.relu(h, need_mask=recording)
        if recording:
            tape.append(("relu", mask))
        if i in spec.pool_after:
            h, pool_cache = layers.maxpool2(h, need_cache=recording)
            if recording:
                tape.append(("pool", pool_cache))
        h, dmask = layers.dropout(h, rate, rng) if rate > 0 else (h, None)
        if recording:
            tape.append(("dropout", dmask))
    shape = h.shape
    h = h.reshape(shape[0], -1)
    if recording:
        tape.append(("flatten", shape))
    h, cache = layers.dense(h, t["embed_w"], t["embed_b"])
    if recording:
        tape.append(("dense", "embed", cache))
    h, mask = layers.relu(h, need_mask=recording)
    if recording:
        tape.append(("relu", mask))
    h, dmask = layers.dropout(h, rate, rng) if rate > 0 else (h, None)
    if recording:
        tape.append(("dropout", dmask))
    return h, new_buffers


def head_logits(params: ModelParams, features: np.ndarray, train: bool,
                rng: np.random.Generator | None, tape: list | None = None) -> np.ndarray:
    """Head forward: siamese g-stack or classifier unit -> (B,) logits."""
    spec = params.spec
    t = params.tensors
    rate = spec.dropout_rate if train else 0.0
    recording = tape is not None
    h = features
    if spec.head == HEAD_SIAMESE:
        n_dense = len(spec.g_hidden) + 1
        for j in range(1, n_dense + 1):
            h, cache = layers.dense(h, t[f"g{j}_w"], t[f"g{j}_b"])
            if recording:
                tape.append(("dense", f"g{j}", cache))
            if j < n_dense:
                h, mask = layers.relu(h, need_mask=recording)
                if recording:
                    tape.append(("relu", mask))
                h, dmask = layers.dropout(h, rate, rng) if rate > 0 else (h, None)
                if recording:
                    tape.append(("dropout", dmask))
    else:
        h, cache = layers.dense(h, t["cls_w"], t["cls_b"])
        if recording:
            tape.append(("dense", "cls", cache))
    return h[:, 0]


def _rng_for(dropout_seed) -> np.random.Generator:
    return np.random.default_rng(0 if dropout_seed is None else dropout_seed)


def embed_forward(params: ModelParams, x, mode: str = "infer", dropout_seed=None):
    """Embedding vector(s) for one window or a batch.

    Inference mode uses batch-norm running statistics and no dropout, so it
    is deterministic per input.
    """
    arr, single = _as_batch(x, params.spec)
    train = mode == "train"
    emb, _ = embed_batch(params, arr, train, _rng_for(dropout_seed) if train else None)
    return emb[0] if single else emb


def score_from_embeddings(params: ModelParams, ea, eb, mode: str = "infer",
                          dropout_seed=None):
    """Similarity in (0,1) from precomputed embeddings: sigmoid(g(|ea - eb|))."""
    if params.spec.head != HEAD_SIAMESE:
        raise WrongHeadError("similarity scoring requires the siamese head")
    ea = np.asarray(ea, dtype=params.spec.np_dtype)
    eb = np.asarray(eb, dtype=params.spec.np_dtype)
    if ea.shape != eb.shape:
        raise ShapeMismatchError(f"embedding shapes differ: {ea.shape} vs {eb.shape}")
    single = ea.ndim == 1
    if single:
        ea, eb = ea[None], eb[None]
    train = mode == "train"
    logits = head_logits(params, np.abs(ea - eb), train,
                         _rng_for(dropout_seed) if train else None)
    s = sigmoid(logits)
    return float(s[0]) if single else s


def siamese_score(params: ModelParams, xa, xb, mode: str = "infer", dropout_seed=None):
    """Similarity score of two windows; symmetric in (xa, xb) by construction."""
    if params.spec.head != HEAD_SIAMESE:
        raise WrongHeadError("siamese_score requires the siamese head")
    a, single_a = _as_batch(xa, params.spec)
    b, single_b = _as_batch(xb, params.spec)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"pair shapes differ: {a.shape} vs {b.shape}")
    train = mode == "train"
    rng = _rng_for(dropout_seed) if train else None
    # one pass over the concatenated pair keeps train-mode batch norm symmetric
    emb, _ = embed_batch(params, np.concatenate([a, b]), train, rng)
    ea, eb = emb[: a.shape[0]], emb[a.shape[0]:]
    logits = head_logits(params, np.abs(ea - eb), train, rng)
    s = sigmoid(logits)
    return float(s[0]) if (single_a and single_b) else s


def classify(params: ModelParams, x, mode: str = "infer", dropout_seed=None):
    """Preictal-class probability in (0,1) for one window or a batch."""
    if params.spec.head != HEAD_CLASSIFIER:
        raise WrongHeadError("classify requires the classifier head")
    arr, single = _as_batch(x, params.spec)
    train = mode == "train"
    rng = _rng_for(dropout_seed) if train else None
    emb, _ = embed_batch(params, arr, train, rng)
    logits = head_logits(params, emb, train, rng)
    s = sigmoid(logits)
    return float(s[0]) if single else s
