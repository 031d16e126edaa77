"""World-model architecture configuration."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .. import envs
from ..tensorops import ContractError

SEQ2SEQ = "seq2seq"
MLP = "mlp"


@dataclass(frozen=True)
class ModelConfig:
    latent_width: int = 32
    history_len: int = 5
    horizon: int = 5
    dynamics_layers: int = 2
    dynamics_heads: int = 4
    reward_layers: int = 1
    reward_heads: int = 1
    value_layers: int = 1
    value_heads: int = 1
    policy_layers: int = 2
    policy_heads: int = 4
    head_variant: str = SEQ2SEQ
    reconstruction: bool = False
    return_head_causal: bool = False
    ffn_hidden: int = 128
    encoder_hidden: int = 64
    head_hidden: int = 64
    aug_proprio_std: float = 0.01
    aug_extero_std: float = 0.02
    # observation/action geometry, fixed by the environment
    proprio_dim: int = 6
    extero_rows: int = 5
    extero_cols: int = 5
    action_dim: int = 2
    action_scale: float = 1.0

    def __post_init__(self):
        if self.history_len < 1 or self.horizon < 1:
            raise ContractError("history_len and horizon must be at least 1")
        if self.latent_width < 1 or self.latent_width % self.dynamics_heads:
            raise ContractError("latent width must be positive and divisible by head counts")
        if self.head_variant not in (SEQ2SEQ, MLP):
            raise ContractError(f"unknown head variant '{self.head_variant}'")

    @property
    def extero_dim(self):
        return self.extero_rows * self.extero_cols

    @property
    def obs_dim(self):
        return self.proprio_dim + self.extero_dim

    @property
    def window(self):
        return self.history_len + self.horizon + 1


def for_env(env_cfg, **overrides):
    """Desk defaults per environment kind."""
    rows, cols = envs.extero_shape(env_cfg)
    base = dict(
        proprio_dim=envs.proprio_dim(env_cfg),
        extero_rows=rows,
        extero_cols=cols,
        action_dim=envs.action_dim(env_cfg),
        action_scale=envs.action_bound(env_cfg),
    )
    if env_cfg.kind == envs.SWING_UP:
        base.update(history_len=8, horizon=8)
    base.update(overrides)
    return ModelConfig(**base)


def config_meta(cfg):
    """Flatten to checkpoint meta entries."""
    keys = ("latent_width history_len horizon dynamics_layers dynamics_heads "
            "reward_layers reward_heads value_layers value_heads policy_layers "
            "policy_heads head_variant reconstruction return_head_causal "
            "ffn_hidden encoder_hidden head_hidden aug_proprio_std aug_extero_std "
            "proprio_dim extero_rows extero_cols action_dim action_scale").split()
    return {f"model.{k}": str(getattr(cfg, k)) for k in keys}


def config_from_meta(meta):
    ints = ("latent_width history_len horizon dynamics_layers dynamics_heads "
            "reward_layers reward_heads value_layers value_heads policy_layers "
            "policy_heads ffn_hidden encoder_hidden head_hidden proprio_dim "
            "extero_rows extero_cols action_dim").split()
    floats = ("aug_proprio_std", "aug_extero_std", "action_scale")
    fields = {}
    for key, raw in meta.items():
        if not key.startswith("model."):
            continue
        name = key[len("model."):]
        if name in ints:
            fields[name] = int(raw)
        elif name in floats:
            fields[name] = float(raw)
        elif name in ("reconstruction", "return_head_causal"):
            fields[name] = raw == "True"
        else:
            fields[name] = raw
    return ModelConfig(**fields)
