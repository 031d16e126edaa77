"""Training objectives: the pretraining loss over simulator data and the
dynamics-only objective for deployment data.

Per window anchored at step t, the pretraining loss sums over the T
predicted steps: squared latent error against stop-gradient encoder
targets, range-normalized squared reward and value errors, and an
expert-masked behavior-cloning term; the window's terms are summed and
averaged over the batch. Finetuning keeps only the latent term, with
every component but the dynamics frozen and no augmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensorops import ContractError, backward, concat, no_grad, tensor
from . import nets
from .config import MLP


@dataclass(frozen=True)
class LossWeights:
    reward_weight: float
    value_weight: float
    bc_weight: float

    def __post_init__(self):
        if min(self.reward_weight, self.value_weight, self.bc_weight) <= 0:
            raise ContractError("loss weights must be strictly positive")


def compute_norm_constants(manifest):
    """Per-target weights 1/range^2 from the dataset manifest; a
    degenerate zero range falls back to weight 1."""
    try:
        spans = {
            "reward": float(manifest["reward_max"]) - float(manifest["reward_min"]),
            "value": float(manifest["value_max"]) - float(manifest["value_min"]),
            "action": float(manifest["action_max"]) - float(manifest["action_min"]),
        }
    except KeyError as missing:
        raise ContractError(f"manifest lacks target range key {missing}")
    w = {k: (1.0 / (s * s) if s > 0 else 1.0) for k, s in spans.items()}
    return LossWeights(w["reward"], w["value"], w["action"])


def weights_meta(weights):
    return {
        "loss.reward_weight": repr(weights.reward_weight),
        "loss.value_weight": repr(weights.value_weight),
        "loss.bc_weight": repr(weights.bc_weight),
    }


def weights_from_meta(meta):
    return LossWeights(float(meta["loss.reward_weight"]),
                       float(meta["loss.value_weight"]),
                       float(meta["loss.bc_weight"]))


def encode_targets(store, cfg, batch):
    """Stop-gradient latent targets for the T future observations."""
    h, t = batch.history_len, batch.horizon
    b = len(batch)
    prop = batch.proprio[:, h + 1:h + t + 1].reshape(b * t, cfg.proprio_dim)
    ext = batch.extero[:, h + 1:h + t + 1].reshape(b * t, cfg.extero_rows, cfg.extero_cols)
    with no_grad():
        z = nets.encode(store, cfg, prop, ext)
    return z.data.reshape(b, t, cfg.latent_width)


def _forward_inputs(store, cfg, batch):
    h = batch.history_len
    z_t = nets.encode(store, cfg, batch.input_proprio[:, h], batch.input_extero[:, h])
    h_tokens, blocked = nets.encode_history(
        store, cfg, batch.input_proprio[:, :h], batch.actions[:, :h],
        batch.input_extero[:, h], batch.pad)
    return z_t, h_tokens, blocked


def pretrain_loss(store, cfg, batch, weights, latent_targets=None):
    """Full supervised objective; returns (scalar loss, float diagnostics)."""
    if np.isnan(batch.rewards).any() or np.isnan(batch.values).any():
        raise ContractError("NaN targets in batch")
    h, t = batch.history_len, batch.horizon
    b = len(batch)
    z_t, h_tokens, blocked = _forward_inputs(store, cfg, batch)
    future_actions = batch.actions[:, h:h + t]
    zs = nets.rollout_latents(store, cfg, z_t, future_actions, h_tokens, blocked)
    if latent_targets is None:
        latent_targets = encode_targets(store, cfg, batch)
    z_seq = concat([z_t.reshape((b, 1, cfg.latent_width)), zs], axis=1)
    r_hat = nets.predict_rewards(store, cfg, z_seq, future_actions)
    v_hat = nets.predict_values(store, cfg, z_seq)
    a_hat = nets.base_policy(store, cfg, z_t, h_tokens, blocked)

    diff = zs - tensor(latent_targets)
    latent = ((diff * diff).sum(axis=-1) * batch.valid_z).sum(axis=1)
    r_err = r_hat - batch.rewards[:, h:h + t]
    reward = ((r_err * r_err) * batch.valid_r).sum(axis=1) * weights.reward_weight
    v_err = v_hat - batch.values[:, h + 1:h + t + 1]
    value = ((v_err * v_err) * batch.valid_z).sum(axis=1) * weights.value_weight
    a_err = a_hat - tensor(future_actions)
    bc_mask = batch.valid_r * batch.expert_flag[:, h:h + t]
    bc = ((a_err * a_err).sum(axis=-1) * bc_mask).sum(axis=1) * weights.bc_weight

    total = latent + reward + value + bc
    parts = {
        "latent": float(latent.mean().item()),
        "reward": float(reward.mean().item()),
        "value": float(value.mean().item()),
        "bc": float(bc.mean().item()),
    }
    if cfg.reconstruction:
        recon = reconstruction_loss(store, cfg, zs, batch)
        total = total + recon
        parts["reconstruction"] = float(recon.mean().item())
    loss = total.mean()
    parts["total"] = float(loss.item())
    return loss, parts


def reconstruction_loss(store, cfg, zs, batch):
    """Squared error of decoded future latents against raw observations."""
    if not cfg.reconstruction:
        raise ContractError("reconstruction is disabled in this configuration")
    h, t = batch.history_len, batch.horizon
    b = len(batch)
    decoded = nets.decode_obs(store, cfg, zs)
    target = np.concatenate(
        [batch.proprio[:, h + 1:h + t + 1],
         batch.extero[:, h + 1:h + t + 1].reshape(b, t, cfg.extero_dim)], axis=-1)
    err = decoded - tensor(target)
    return ((err * err).sum(axis=-1) * batch.valid_z).sum(axis=1)


FROZEN_FOR_FINETUNE = ("encoder", "history", "reward", "value", "policy")


def finetune_loss(store, cfg, batch):
    """Latent-dynamics term only, on clean observations.

    Everything but the dynamics must be frozen; the frozen encoder
    supplies fixed latent targets.
    """
    missing = [c for c in FROZEN_FOR_FINETUNE
               if any(n.startswith(c + "/") for n in store.names()) and not store.is_frozen(c)]
    if missing:
        raise ContractError(f"finetuning requires frozen components: {missing}")
    if store.is_frozen("dynamics"):
        raise ContractError("dynamics must stay trainable during finetuning")
    if batch.proprio_in is not None:
        raise ContractError("no augmentation during finetuning")
    z_t, h_tokens, blocked = _forward_inputs(store, cfg, batch)
    h, t = batch.history_len, batch.horizon
    zs = nets.rollout_latents(store, cfg, z_t, batch.actions[:, h:h + t], h_tokens, blocked)
    targets = encode_targets(store, cfg, batch)
    diff = zs - tensor(targets)
    latent = ((diff * diff).sum(axis=-1) * batch.valid_z).sum(axis=1)
    return latent.mean()


def heldout_dynamics_loss(store, cfg, episodes, max_windows=2048):
    """Mean per-window latent error over held-out trajectories (no grad)."""
    from .data import build_batch, window_index

    picks = window_index(episodes)
    if not picks:
        raise ContractError("no valid windows in held-out episodes")
    picks = picks[:max_windows]
    batch = build_batch(episodes, picks, cfg.history_len, cfg.horizon)
    with no_grad():
        z_t, h_tokens, blocked = _forward_inputs(store, cfg, batch)
        h, t = batch.history_len, batch.horizon
        zs = nets.rollout_latents(store, cfg, z_t, batch.actions[:, h:h + t],
                                  h_tokens, blocked)
        targets = encode_targets(store, cfg, batch)
        err = ((zs.data - targets) ** 2).sum(axis=-1) * batch.valid_z
        per_window = err.sum(axis=1)
    return float(per_window.mean())
