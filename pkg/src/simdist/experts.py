"""Privileged scripted controllers, graded checkpoint families, and a
rollout-based value oracle.

The full-quality controller (quality 1.0) stands in for a trained expert:
a PD law for slot_reach and energy shaping plus a PD catch for swing_up.
Checkpoints are the same controllers with gains scaled by quality and a
small constant action bias, giving a spectrum of competence. Values are
discounted returns of the full-quality controller rolled out to episode
end in the nominal environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import envs
from .tensorops import ContractError

# gains tuned so the quality-1.0 controller exceeds 95% success in the
# nominal environments (see tests/test_experts.py)
SLOT_POS_GAIN = 4.0
SLOT_DAMP_GAIN = 2.0
SWING_ENERGY_GAIN = 2.0
SWING_STAB_KP = 10.0
SWING_STAB_KD = 2.5
SWING_SWITCH_COS = 0.95

CHECKPOINT_QUALITIES = np.round(np.arange(0.2, 0.95, 0.1), 2)  # {0.2 .. 0.9}
CHECKPOINT_BIAS_RANGE = 0.1


@dataclass(frozen=True)
class ExpertConfig:
    env_kind: str = envs.SLOT_REACH
    quality: float = 1.0
    pos_gain: float = SLOT_POS_GAIN
    damp_gain: float = SLOT_DAMP_GAIN
    energy_gain: float = SWING_ENERGY_GAIN
    stab_kp: float = SWING_STAB_KP
    stab_kd: float = SWING_STAB_KD
    switch_cos: float = SWING_SWITCH_COS
    bias: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.quality <= 1.0:
            raise ContractError("quality must lie in (0, 1]")
        if self.quality == 1.0 and any(b != 0.0 for b in self.bias):
            raise ContractError("the full-quality controller carries no bias")


@dataclass(frozen=True)
class ValueOracleConfig:
    rollouts: int = 4
    discount: float = 0.99

    def __post_init__(self):
        if self.rollouts < 1:
            raise ContractError("need at least one rollout")
        if not 0.0 < self.discount <= 1.0:
            raise ContractError("discount must lie in (0, 1]")


def expert_action(state, cfg):
    """Privileged-state control law, clipped to the action bound."""
    if cfg.env_kind == envs.SLOT_REACH:
        if not isinstance(state, envs.SlotReachState):
            raise ContractError("slot_reach controller got a different environment's state")
        return _slot_action_batch(state.pos[None], state.vel[None], state.goal[None], cfg)[0]
    if not isinstance(state, envs.SwingUpState):
        raise ContractError("swing_up controller got a different environment's state")
    return _swing_action_batch(np.asarray([state.angle], np.float32),
                               np.asarray([state.rate], np.float32), cfg,
                               _nominal_plant())


def _slot_action_batch(pos, vel, goal, cfg):
    raw = np.float32(cfg.pos_gain) * (goal - pos) - np.float32(cfg.damp_gain) * vel
    act = np.clip(np.float32(cfg.quality) * raw, -1.0, 1.0)
    return (act + np.asarray(cfg.bias, np.float32)).astype(np.float32)


def _nominal_plant():
    # energy terms always use the nominal plant: the controller's model,
    # not the (possibly perturbed) world it runs in
    return envs.nominal_config(envs.SWING_UP)


def _swing_action_batch(theta, rate, cfg, plant):
    energy = envs.swing_energy(theta, rate, plant).astype(np.float32)
    target = np.float32(plant.mass * plant.gravity * plant.length / 2.0)
    pump = np.float32(cfg.energy_gain) * rate * (target - energy)
    stab = -np.float32(cfg.stab_kp) * theta - np.float32(cfg.stab_kd) * rate
    raw = np.where(np.cos(theta) < np.float32(cfg.switch_cos), pump, stab)
    act = np.clip(np.float32(cfg.quality) * raw, -2.0, 2.0)
    return (act + np.float32(cfg.bias[0])).astype(np.float32)


def make_checkpoints(env_kind, count, rng):
    """Sub-optimal controller variants: scaled gains plus an action bias."""
    if count < 1:
        raise ContractError("need at least one checkpoint")
    dims = 2 if env_kind == envs.SLOT_REACH else 1
    out = []
    for _ in range(count):
        quality = float(rng.choice(CHECKPOINT_QUALITIES))
        bias = rng.uniform(-CHECKPOINT_BIAS_RANGE, CHECKPOINT_BIAS_RANGE, dims)
        if dims == 1:
            bias = (float(bias[0]), 0.0)
        else:
            bias = (float(bias[0]), float(bias[1]))
        out.append(ExpertConfig(env_kind=env_kind, quality=quality, bias=bias))
    return out


def value_target(state, env_cfg, oracle_cfg, rng):
    """Mean discounted return of the full-quality controller from ``state``.

    Rollouts run in the nominal environment to episode end (or success).
    A state at the episode horizon has value zero.
    """
    if env_cfg.variant != "nominal":
        raise ContractError("value targets are defined in the nominal environment only")
    returns = rollout_values(state, env_cfg, oracle_cfg)
    return float(np.mean(returns))


def rollout_values(state, env_cfg, oracle_cfg):
    """Per-rollout discounted returns (deterministic plant, so identical)."""
    k = oracle_cfg.rollouts
    gamma = np.float32(oracle_cfg.discount)
    expert = ExpertConfig(env_kind=env_cfg.kind)
    returns = np.zeros(k, np.float64)
    if env_cfg.kind == envs.SLOT_REACH:
        pos = np.repeat(state.pos[None], k, axis=0)
        vel = np.repeat(state.vel[None], k, axis=0)
        goal = np.repeat(state.goal[None], k, axis=0)
        pending = np.repeat(state.pending[None], k, axis=0)
        alive = np.ones(k, bool)
        disc = np.float32(1.0)
        for _ in range(state.step, env_cfg.episode_len):
            act = _slot_action_batch(pos, vel, goal, expert)
            act = np.clip(act, -1.0, 1.0)
            pos, vel, pending, reward, success = envs.slot_batch_step(
                pos, vel, pending, goal, act, env_cfg)
            returns += np.where(alive, disc * reward, 0.0)
            alive &= ~success
            if not alive.any():
                break
            disc = disc * gamma
        return returns
    theta = np.repeat(np.asarray([state.angle], np.float32), k)
    rate = np.repeat(np.asarray([state.rate], np.float32), k)
    plant = _nominal_plant()
    disc = np.float32(1.0)
    for _ in range(state.step, env_cfg.episode_len):
        act = _swing_action_batch(theta, rate, expert, plant)
        act = np.clip(act, -2.0, 2.0)
        theta, rate, reward, _ = envs.swing_batch_step(theta, rate, act, env_cfg)
        returns += disc * reward
        disc = disc * gamma
    return returns
