"""Learnable core: base CNN, similarity and classifier heads, training."""

from .network import (
    HEAD_CLASSIFIER,
    HEAD_SIAMESE,
    ArchitectureSpec,
    ModelParams,
    classify,
    embed_batch,
    embed_forward,
    expected_shapes,
    head_logits,
    init_params,
    score_from_embeddings,
    siamese_score,
)
from .serialize import load_params, save_params
from .training import (
    AdamState,
    EpochStats,
    TrainConfig,
    adam_step,
    backward,
    bce_loss,
    fine_tune,
    history_csv,
    init_adam,
    stack_pairs,
    stack_windows,
    train,
)

__all__ = [
    "HEAD_CLASSIFIER", "HEAD_SIAMESE", "ArchitectureSpec", "ModelParams",
    "classify", "embed_batch", "embed_forward", "expected_shapes", "head_logits",
    "init_params", "score_from_embeddings", "siamese_score",
    "load_params", "save_params",
    "AdamState", "EpochStats", "TrainConfig", "adam_step", "backward", "bce_loss",
    "fine_tune", "history_csv", "init_adam", "stack_pairs", "stack_windows", "train",
]
