"""Two analytic partially observed environments, each with a nominal and
a perturbed ("real") parameterization.

slot_reach: a 2-D point mass on the unit square steered toward a goal.
The agent observes noisy position, velocity, its previous action, and a
5x5 goal-proximity grid centered on itself; the real variant weakens the
actuator, raises friction, adds a constant wind, and delays actions by
one step.

swing_up: a torque-limited rod pendulum driven to the upright position.
The agent observes sin/cos of the angle and its previous action; the
angular rate is hidden, so history is required to act well. The real
variant is heavier, more damped, and weaker.

Dynamics are deterministic; randomness enters only through resets and
slot_reach position noise. Single-state stepping runs through the same
vectorized kernels as batched rollouts, so both are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tensorops import ContractError

SLOT_REACH = "slot_reach"
SWING_UP = "swing_up"
KINDS = (SLOT_REACH, SWING_UP)

SUCCESS_RADIUS = 0.03
SUCCESS_BONUS = 10.0
GRID_SIZE = 5
GRID_CELL = 0.1
UPRIGHT_ANGLE = 0.2
UPRIGHT_WINDOW = 20


@dataclass(frozen=True)
class EnvConfig:
    kind: str = SLOT_REACH
    dt: float = 0.1
    episode_len: int = 25
    seed: int = 0
    variant: str = "nominal"
    # slot_reach parameters
    gain: float = 1.0
    friction: float = 0.5
    wind: tuple = (0.0, 0.0)
    action_delay: int = 0
    obs_noise_std: float = 0.005
    # swing_up parameters
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    damping: float = 0.05
    torque_gain: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown environment kind '{self.kind}'")
        if self.dt <= 0 or self.episode_len <= 0 or self.action_delay < 0:
            raise ContractError("require dt > 0, episode_len > 0, action_delay >= 0")
        if self.variant not in ("nominal", "real"):
            raise ContractError(f"unknown variant '{self.variant}'")


def nominal_config(kind, **overrides):
    """Kind-appropriate defaults; overrides replace individual fields."""
    if kind == SLOT_REACH:
        base = dict(kind=kind, dt=0.1, episode_len=25)
    elif kind == SWING_UP:
        base = dict(kind=kind, dt=0.05, episode_len=120)
    else:
        raise ContractError(f"unknown environment kind '{kind}'")
    base.update(overrides)
    return EnvConfig(**base)


def make_real_variant(cfg):
    """The fixed perturbed configuration standing in for the deployment gap."""
    if cfg.variant != "nominal":
        raise ContractError("config is already the perturbed variant")
    if cfg.kind == SLOT_REACH:
        return replace(cfg, variant="real", gain=0.6, friction=1.0,
                       wind=(0.15, 0.0), action_delay=1)
    return replace(cfg, variant="real", mass=1.3, damping=0.3, torque_gain=0.7)


def action_dim(cfg):
    return 2 if cfg.kind == SLOT_REACH else 1


def action_bound(cfg):
    return 1.0 if cfg.kind == SLOT_REACH else 2.0


def proprio_dim(cfg):
    return 6 if cfg.kind == SLOT_REACH else 3


def extero_shape(cfg):
    return (GRID_SIZE, GRID_SIZE) if cfg.kind == SLOT_REACH else (0, 0)


@dataclass
class SlotReachState:
    pos: np.ndarray
    vel: np.ndarray
    goal: np.ndarray
    pending: np.ndarray  # (action_delay, 2) commanded-but-unapplied actions, oldest first
    prev_action: np.ndarray
    step: int = 0


@dataclass
class SwingUpState:
    angle: float
    rate: float
    prev_action: np.ndarray = field(default_factory=lambda: np.zeros(1, np.float32))
    step: int = 0
    upright_streak: int = 0


@dataclass(frozen=True)
class Observation:
    proprio: np.ndarray
    extero: np.ndarray


@dataclass(frozen=True)
class StepResult:
    obs: Observation
    reward: float
    done: bool
    success: bool
    state: object


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    out = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


# -- vectorized dynamics kernels (shared by step(), oracles, planners) --

def slot_batch_step(pos, vel, pending, goal, actions, cfg):
    """One slot_reach transition over a leading batch axis.

    Returns (pos', vel', pending', rewards, success). ``pending`` is
    (B, action_delay, 2); the oldest pending action is applied and the
    commanded one queued.
    """
    dt = np.float32(cfg.dt)
    if cfg.action_delay > 0:
        eff = pending[:, 0]
        pending = np.concatenate([pending[:, 1:], actions[:, None]], axis=1)
    else:
        eff = actions
    wind = np.asarray(cfg.wind, np.float32)
    vel = vel + dt * (np.float32(cfg.gain) * eff - np.float32(cfg.friction) * vel + wind)
    pos = np.clip(pos + dt * vel, 0.0, 1.0).astype(np.float32)
    dist = np.sqrt(((pos - goal) ** 2).sum(axis=-1))
    reward = 1.0 - np.tanh(np.float32(4.0) * dist) - np.float32(0.05) * (actions ** 2).sum(axis=-1)
    success = dist < np.float32(SUCCESS_RADIUS)
    reward = (reward + np.float32(SUCCESS_BONUS) * success).astype(np.float32)
    return pos, vel, pending, reward, success


def swing_batch_step(theta, rate, actions, cfg):
    """One swing_up transition over a batch. Returns (theta', rate', rewards, upright)."""
    dt = np.float32(cfg.dt)
    m, length, g = np.float32(cfg.mass), np.float32(cfg.length), np.float32(cfg.gravity)
    accel = (np.float32(1.5) * g / length) * np.sin(theta) \
        + (np.float32(3.0) / (m * length * length)) \
        * (np.float32(cfg.torque_gain) * actions - np.float32(cfg.damping) * rate)
    rate = rate + dt * accel
    theta = wrap_angle(theta + dt * rate).astype(np.float32)
    reward = (np.cos(theta) - np.float32(1e-3) * actions * actions).astype(np.float32)
    upright = np.abs(theta) < np.float32(UPRIGHT_ANGLE)
    return theta, rate.astype(np.float32), reward, upright


def swing_energy(theta, rate, cfg):
    """Mechanical energy of the rod about its pivot (upright = max potential)."""
    inertia = cfg.mass * cfg.length ** 2 / 3.0
    return 0.5 * inertia * rate ** 2 + cfg.mass * cfg.gravity * (cfg.length / 2.0) * np.cos(theta)


# -- observations --------------------------------------------------------

def goal_grid(pos, goal):
    """5x5 proximity field around the agent; entry exp(-4 |cell - goal|)."""
    offsets = (np.arange(GRID_SIZE, dtype=np.float32) - (GRID_SIZE - 1) / 2) * np.float32(GRID_CELL)
    diff = (pos - goal).astype(np.float32)
    dx = diff[0] + offsets[:, None]
    dy = diff[1] + offsets[None, :]
    return np.exp(np.float32(-4.0) * np.sqrt(dx * dx + dy * dy)).astype(np.float32)


def observe(state, cfg, rng):
    if cfg.kind == SLOT_REACH:
        noisy = state.pos + rng.normal(0.0, cfg.obs_noise_std, 2).astype(np.float32)
        proprio = np.concatenate([noisy, state.vel, state.prev_action]).astype(np.float32)
        return Observation(proprio, goal_grid(state.pos, state.goal))
    proprio = np.array([np.sin(state.angle), np.cos(state.angle), state.prev_action[0]],
                       np.float32)
    return Observation(proprio, np.zeros((0, 0), np.float32))


# -- lifecycle ------------------------------------------------------------

def reset(cfg, rng):
    """Fresh episode state and its first observation."""
    if cfg.kind == SLOT_REACH:
        pos = np.array([rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.5)], np.float32)
        goal = np.array([rng.uniform(0.0, 1.0), rng.uniform(0.85, 0.95)], np.float32)
        state = SlotReachState(
            pos=pos, vel=np.zeros(2, np.float32), goal=goal,
            pending=np.zeros((cfg.action_delay, 2), np.float32),
            prev_action=np.zeros(2, np.float32))
    else:
        theta = np.float32(rng.uniform(-np.pi, np.pi))
        rate = np.float32(rng.uniform(-1.0, 1.0))
        state = SwingUpState(angle=wrap_angle(theta).astype(np.float32)[()], rate=rate)
    return state, observe(state, cfg, rng)


def step(state, action, cfg, rng):
    """Advance one step. The caller clips actions to the bound."""
    action = np.asarray(action, np.float32)
    if not np.isfinite(action).all():
        raise ContractError(f"non-finite action {action}")
    if cfg.kind == SLOT_REACH:
        pos, vel, pending, reward, success = slot_batch_step(
            state.pos[None], state.vel[None], state.pending[None],
            state.goal[None], action[None], cfg)
        nxt = SlotReachState(pos=pos[0], vel=vel[0], goal=state.goal,
                             pending=pending[0], prev_action=action,
                             step=state.step + 1)
        succ = bool(success[0])
        done = succ or nxt.step >= cfg.episode_len
        return StepResult(observe(nxt, cfg, rng), float(reward[0]), done, succ, nxt)
    theta, rate, reward, upright = swing_batch_step(
        np.asarray([state.angle], np.float32), np.asarray([state.rate], np.float32),
        action.reshape(1), cfg)
    streak = state.upright_streak + 1 if bool(upright[0]) else 0
    nxt = SwingUpState(angle=theta[0], rate=rate[0], prev_action=action.reshape(1),
                       step=state.step + 1, upright_streak=streak)
    done = nxt.step >= cfg.episode_len
    succ = bool(done and streak >= UPRIGHT_WINDOW)
    return StepResult(observe(nxt, cfg, rng), float(reward[0]), done, succ, nxt)
