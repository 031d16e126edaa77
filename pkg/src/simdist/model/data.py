"""Window sampling over episode data and the rollout history buffer.

A training window covers H history steps, the anchor step, and T future
steps. Windows that start before the episode repeat the first
observation with zero actions and a pad flag; windows that run past the
episode end are zero-filled with per-step validity masks. Reward and
behavior-cloning terms stay valid through the final episode step, while
latent and value terms need the next observation and stop one step
earlier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class Batch:
    history_len: int
    horizon: int
    proprio: np.ndarray      # (B, W, P) clean observations
    extero: np.ndarray       # (B, W, R, C)
    actions: np.ndarray      # (B, W, A)
    expert_flag: np.ndarray  # (B, W)
    rewards: np.ndarray      # (B, W)
    values: np.ndarray       # (B, W)
    pad: np.ndarray          # (B, H) episode-start padding flags
    valid_z: np.ndarray      # (B, T) latent/value step masks
    valid_r: np.ndarray      # (B, T) reward/bc step masks
    proprio_in: np.ndarray | None = None  # augmented model-input copies
    extero_in: np.ndarray | None = None

    def __len__(self):
        return self.proprio.shape[0]

    @property
    def input_proprio(self):
        return self.proprio_in if self.proprio_in is not None else self.proprio

    @property
    def input_extero(self):
        return self.extero_in if self.extero_in is not None else self.extero


def window_index(episodes, min_future=1):
    """All (episode index, anchor step) pairs with at least ``min_future``
    supervised latent steps."""
    picks = []
    for e, ep in enumerate(episodes):
        last_anchor = len(ep) - 1 - min_future
        for t in range(last_anchor + 1):
            picks.append((e, t))
    return picks


def build_batch(episodes, picks, history_len, horizon):
    h, t_hor = history_len, horizon
    w = h + t_hor + 1
    b = len(picks)
    first = episodes[picks[0][0]]
    p_dim = first.proprio.shape[1]
    rows, cols = first.extero.shape[1:]
    a_dim = first.actions.shape[1]
    has_targets = first.rewards is not None

    proprio = np.zeros((b, w, p_dim), np.float32)
    extero = np.zeros((b, w, rows, cols), np.float32)
    actions = np.zeros((b, w, a_dim), np.float32)
    flags = np.zeros((b, w), np.float32)
    rewards = np.zeros((b, w), np.float32)
    values = np.zeros((b, w), np.float32)
    pad = np.zeros((b, h), bool)
    valid_z = np.zeros((b, t_hor), np.float32)
    valid_r = np.zeros((b, t_hor), np.float32)

    for i, (e, t) in enumerate(picks):
        ep = episodes[e]
        length = len(ep)
        lo = t - h
        n_pad = max(0, -lo)
        pad[i, :n_pad] = True
        if n_pad:
            proprio[i, :n_pad] = ep.proprio[0]
            extero[i, :n_pad] = ep.extero[0]
        src_lo = max(lo, 0)
        src_hi = min(t + t_hor + 1, length)
        dst_lo = src_lo - lo
        dst_hi = dst_lo + (src_hi - src_lo)
        proprio[i, dst_lo:dst_hi] = ep.proprio[src_lo:src_hi]
        extero[i, dst_lo:dst_hi] = ep.extero[src_lo:src_hi]
        actions[i, dst_lo:dst_hi] = ep.actions[src_lo:src_hi]
        if has_targets:
            flags[i, dst_lo:dst_hi] = ep.expert_flag[src_lo:src_hi]
            rewards[i, dst_lo:dst_hi] = ep.rewards[src_lo:src_hi]
            values[i, dst_lo:dst_hi] = ep.values[src_lo:src_hi]
        remain = length - 1 - t  # future steps with a recorded next observation
        valid_z[i, :min(t_hor, remain)] = 1.0
        valid_r[i, :min(t_hor, remain + 1)] = 1.0

    return Batch(h, t_hor, proprio, extero, actions, flags, rewards, values,
                 pad, valid_z, valid_r)


def apply_augmentation(batch, proprio_std, extero_std, rng):
    """Gaussian noise on the model-input observations only.

    Inputs are the history slots and the anchor observation (window
    indices 0..H); the future observations that source regression
    targets stay clean, as do actions, rewards, and values.
    """
    if proprio_std < 0 or extero_std < 0:
        raise ValueError("noise std must be non-negative")
    h = batch.history_len
    proprio_in = batch.proprio.copy()
    extero_in = batch.extero.copy()
    if proprio_std > 0:
        proprio_in[:, :h + 1] += rng.normal(
            0.0, proprio_std, proprio_in[:, :h + 1].shape).astype(np.float32)
    if extero_std > 0 and extero_in.shape[-1]:
        extero_in[:, :h + 1] += rng.normal(
            0.0, extero_std, extero_in[:, :h + 1].shape).astype(np.float32)
    return replace(batch, proprio_in=proprio_in, extero_in=extero_in)


class RolloutHistory:
    """Receding window of the last H executed (observation, action) pairs.

    Fresh episodes start fully padded: slots repeat the first observation
    with zero actions and are flagged so attention can ignore them.
    """

    def __init__(self, history_len, proprio_dim, action_dim):
        self.h = history_len
        self.proprio = np.zeros((history_len, proprio_dim), np.float32)
        self.actions = np.zeros((history_len, action_dim), np.float32)
        self.pad = np.ones(history_len, bool)

    def reset(self, first_proprio):
        self.proprio[:] = first_proprio
        self.actions[:] = 0.0
        self.pad[:] = True

    def push(self, proprio, action):
        self.proprio = np.roll(self.proprio, -1, axis=0)
        self.actions = np.roll(self.actions, -1, axis=0)
        self.pad = np.roll(self.pad, -1)
        self.proprio[-1] = proprio
        self.actions[-1] = action
        self.pad[-1] = False

    def arrays(self):
        return self.proprio[None], self.actions[None], self.pad[None]
