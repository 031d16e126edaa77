from .config import MLP, SEQ2SEQ, ModelConfig, config_from_meta, config_meta, for_env
from .data import Batch, RolloutHistory, apply_augmentation, build_batch, window_index
from .losses import (
    FROZEN_FOR_FINETUNE,
    LossWeights,
    compute_norm_constants,
    encode_targets,
    finetune_loss,
    heldout_dynamics_loss,
    pretrain_loss,
    reconstruction_loss,
    weights_from_meta,
    weights_meta,
)
from .nets import (
    base_policy,
    decode_obs,
    encode,
    encode_history,
    init_world_model,
    predict_rewards,
    predict_values,
    rollout_latents,
)

__all__ = [
    "Batch",
    "FROZEN_FOR_FINETUNE",
    "LossWeights",
    "MLP",
    "ModelConfig",
    "RolloutHistory",
    "SEQ2SEQ",
    "apply_augmentation",
    "base_policy",
    "build_batch",
    "compute_norm_constants",
    "config_from_meta",
    "config_meta",
    "decode_obs",
    "encode",
    "encode_history",
    "encode_targets",
    "finetune_loss",
    "for_env",
    "heldout_dynamics_loss",
    "init_world_model",
    "predict_rewards",
    "predict_values",
    "pretrain_loss",
    "reconstruction_loss",
    "rollout_latents",
    "weights_from_meta",
    "weights_meta",
    "window_index",
]
