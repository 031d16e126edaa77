"""Diverse trajectory generation in the nominal simulator.

Many logical environments run side by side. Each gets a per-dimension
action-noise variance drawn once up front; on every reset it gets a
fresh contiguous on/off noise schedule and is assigned either the
full-quality controller (with the configured probability) or a random
checkpoint. Gaussian noise corrupts actions only inside the on
intervals, and a step is flagged as expert exactly when the full-quality
controller acted without corruption. Every step also logs the reward
and a value-oracle target.

Environments are independent given their seed streams, so generation
may be partitioned across processes; the output record order is
canonical (environment-major, step-minor) regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dataio, envs, experts
from .tensorops import ContractError


@dataclass(frozen=True)
class DataGenConfig:
    num_envs: int = 100
    steps_per_env: int = 1200
    expert_prob: float = 0.5
    noise_var_min: float = 0.01
    noise_var_max: float = 0.09
    noise_on_min: int = 1
    noise_on_max: int = 5
    noise_off_min: int = 5
    noise_off_max: int = 10
    checkpoint_count: int = 8
    value_rollouts: int = 4
    value_discount: float = 0.99
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.expert_prob <= 1.0:
            raise ContractError("expert_prob must lie in [0, 1]")
        if self.noise_on_min < 1 or self.noise_off_min < 1:
            raise ContractError("noise interval ranges must be positive")
        if self.num_envs < 1 or self.steps_per_env < 1 or self.workers < 1:
            raise ContractError("num_envs, steps_per_env, workers must be positive")


def sample_noise_spec(dims, var_min, var_max, rng):
    """Per-dimension noise variances, each uniform in [var_min, var_max]."""
    if var_min < 0:
        raise ContractError("noise variance must be non-negative")
    if var_min > var_max:
        raise ContractError("require var_min <= var_max")
    return rng.uniform(var_min, var_max, dims).astype(np.float32)


def sample_noise_schedule(episode_len, on_range, off_range, rng):
    """Alternating off-gap / on-interval layout, starting with an off-gap.

    Returns a list of half-open (start, stop) on-intervals truncated at
    the episode end; lengths are uniform over the inclusive integer
    ranges.
    """
    if min(on_range) < 1 or min(off_range) < 1:
        raise ContractError("interval ranges must be positive")
    intervals = []
    cursor = 0
    while cursor < episode_len:
        cursor += int(rng.integers(off_range[0], off_range[1] + 1))
        if cursor >= episode_len:
            break
        length = int(rng.integers(on_range[0], on_range[1] + 1))
        intervals.append((cursor, min(cursor + length, episode_len)))
        cursor += length
    return intervals


def schedule_mask(intervals, episode_len):
    mask = np.zeros(episode_len, bool)
    for start, stop in intervals:
        mask[start:stop] = True
    return mask


def _env_seed_seqs(seed, num_envs):
    root = np.random.SeedSequence(seed)
    children = root.spawn(1 + 2 * num_envs)
    return children[0], children[1::2], children[2::2]


def _generate_one_env(env_index, gen_cfg, env_cfg, checkpoints, env_ss, oracle_ss):
    rng = np.random.default_rng(env_ss)
    oracle_rng = np.random.default_rng(oracle_ss)
    oracle_cfg = experts.ValueOracleConfig(gen_cfg.value_rollouts, gen_cfg.value_discount)
    expert = experts.ExpertConfig(env_kind=env_cfg.kind)
    dims = envs.action_dim(env_cfg)
    bound = envs.action_bound(env_cfg)
    variances = sample_noise_spec(dims, gen_cfg.noise_var_min, gen_cfg.noise_var_max, rng)
    stds = np.sqrt(variances)

    episodes = []
    state = obs = None
    policy = None
    noise_on = None
    buf = None
    local_step = 0

    for _ in range(gen_cfg.steps_per_env):
        if state is None:
            state, obs = envs.reset(env_cfg, rng)
            noise_on = schedule_mask(
                sample_noise_schedule(env_cfg.episode_len,
                                      (gen_cfg.noise_on_min, gen_cfg.noise_on_max),
                                      (gen_cfg.noise_off_min, gen_cfg.noise_off_max), rng),
                env_cfg.episode_len)
            use_expert = rng.uniform() < gen_cfg.expert_prob
            policy = expert if use_expert else checkpoints[rng.integers(len(checkpoints))]
            buf = {k: [] for k in ("proprio", "extero", "actions", "flag", "reward", "value")}
            local_step = 0

        raw = experts.expert_action(state, policy)
        corrupted = False
        if noise_on[local_step]:
            eps = rng.standard_normal(dims).astype(np.float32) * stds
            corrupted = bool(np.any(eps != 0.0))
            raw = raw + eps
        action = np.clip(raw, -bound, bound).astype(np.float32)
        is_expert_step = policy is expert and not corrupted
        if is_expert_step:
            reference = np.clip(experts.expert_action(state, expert), -bound, bound)
            if action.tobytes() != reference.astype(np.float32).tobytes():
                raise AssertionError("expert-flagged action diverged from the controller")
        value = experts.value_target(state, env_cfg, oracle_cfg, oracle_rng)

        result = envs.step(state, action, env_cfg, rng)
        buf["proprio"].append(obs.proprio)
        buf["extero"].append(obs.extero)
        buf["actions"].append(action)
        buf["flag"].append(1.0 if is_expert_step else 0.0)
        buf["reward"].append(result.reward)
        buf["value"].append(value)
        local_step += 1
        state, obs = result.state, result.obs
        if result.done:
            episodes.append(_pack_episode(buf, env_cfg))
            state, buf = None, None

    if buf is not None and buf["proprio"]:
        episodes.append(_pack_episode(buf, env_cfg))
    return env_index, episodes


def _pack_episode(buf, env_cfg):
    rows, cols = envs.extero_shape(env_cfg)
    n = len(buf["proprio"])
    return dataio.EpisodeData(
        episode_id=0,  # canonical ids assigned at assembly
        proprio=np.asarray(buf["proprio"], np.float32),
        extero=np.asarray(buf["extero"], np.float32).reshape(n, rows, cols),
        actions=np.asarray(buf["actions"], np.float32),
        expert_flag=np.asarray(buf["flag"], np.float32),
        rewards=np.asarray(buf["reward"], np.float32),
        values=np.asarray(buf["value"], np.float32),
    )


def generate(gen_cfg, env_cfg, checkpoints=None):
    """Run the full generation procedure; returns an in-memory Dataset."""
    if env_cfg.variant != "nominal":
        raise ContractError("generation runs in the nominal environment")
    cp_ss, env_seqs, oracle_seqs = _env_seed_seqs(gen_cfg.seed, gen_cfg.num_envs)
    if checkpoints is None:
        checkpoints = experts.make_checkpoints(
            env_cfg.kind, gen_cfg.checkpoint_count, np.random.default_rng(cp_ss))

    jobs = [(j, gen_cfg, env_cfg, checkpoints, env_seqs[j], oracle_seqs[j])
            for j in range(gen_cfg.num_envs)]
    if gen_cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=gen_cfg.workers) as pool:
            results = list(pool.map(_generate_one_env_star, jobs, chunksize=4))
    else:
        results = [_generate_one_env(*job) for job in jobs]
    results.sort(key=lambda item: item[0])

    episodes = []
    for _, env_episodes in results:
        episodes.extend(env_episodes)
    for i, ep in enumerate(episodes):
        ep.episode_id = i

    manifest = build_manifest(gen_cfg, env_cfg, episodes)
    return dataio.Dataset(manifest, episodes)


def _generate_one_env_star(job):
    return _generate_one_env(*job)


def build_manifest(gen_cfg, env_cfg, episodes):
    rewards = np.concatenate([ep.rewards for ep in episodes])
    values = np.concatenate([ep.values for ep in episodes])
    flags = np.concatenate([ep.expert_flag for ep in episodes])
    rows, cols = envs.extero_shape(env_cfg)
    bound = envs.action_bound(env_cfg)
    manifest = {
        "format_version": str(dataio.VERSION),
        "has_targets": "1",
        "proprio_dim": str(envs.proprio_dim(env_cfg)),
        "extero_rows": str(rows),
        "extero_cols": str(cols),
        "action_dim": str(envs.action_dim(env_cfg)),
        "record_count": str(int(flags.size)),
        "episode_count": str(len(episodes)),
        "expert_flag_fraction": dataio.fmt_float(flags.mean()),
        "reward_min": dataio.fmt_float(rewards.min()),
        "reward_max": dataio.fmt_float(rewards.max()),
        "value_min": dataio.fmt_float(values.min()),
        "value_max": dataio.fmt_float(values.max()),
        "action_min": dataio.fmt_float(-bound),
        "action_max": dataio.fmt_float(bound),
        "gen.num_envs": str(gen_cfg.num_envs),
        "gen.steps_per_env": str(gen_cfg.steps_per_env),
        "gen.expert_prob": dataio.fmt_float(gen_cfg.expert_prob),
        "gen.noise_var_min": dataio.fmt_float(gen_cfg.noise_var_min),
        "gen.noise_var_max": dataio.fmt_float(gen_cfg.noise_var_max),
        "gen.noise_on_min": str(gen_cfg.noise_on_min),
        "gen.noise_on_max": str(gen_cfg.noise_on_max),
        "gen.noise_off_min": str(gen_cfg.noise_off_min),
        "gen.noise_off_max": str(gen_cfg.noise_off_max),
        "gen.checkpoint_count": str(gen_cfg.checkpoint_count),
        "gen.value_rollouts": str(gen_cfg.value_rollouts),
        "gen.value_discount": dataio.fmt_float(gen_cfg.value_discount),
        "gen.seed": str(gen_cfg.seed),
    }
    manifest.update(dataio.env_manifest_items(env_cfg))
    return manifest


@dataclass
class DatasetStats:
    record_count: int
    episode_count: int
    expert_flag_fraction: float | None
    reward_range: tuple | None
    value_range: tuple | None
    episode_length_histogram: dict = field(default_factory=dict)


def dataset_stats(dataset, check_manifest=True):
    """Recompute summary statistics from the record stream."""
    lengths = [len(ep) for ep in dataset.episodes]
    hist = {}
    for n in lengths:
        hist[n] = hist.get(n, 0) + 1
    stats = DatasetStats(
        record_count=sum(lengths),
        episode_count=len(dataset.episodes),
        expert_flag_fraction=None,
        reward_range=None,
        value_range=None,
        episode_length_histogram=dict(sorted(hist.items())),
    )
    if dataset.has_targets and stats.record_count:
        flags = np.concatenate([ep.expert_flag for ep in dataset.episodes])
        rewards = np.concatenate([ep.rewards for ep in dataset.episodes])
        values = np.concatenate([ep.values for ep in dataset.episodes])
        stats.expert_flag_fraction = float(flags.mean())
        stats.reward_range = (float(rewards.min()), float(rewards.max()))
        stats.value_range = (float(values.min()), float(values.max()))
    if check_manifest and dataset.manifest:
        m = dataset.manifest
        if int(m.get("record_count", stats.record_count)) != stats.record_count:
            raise ContractError(
                f"manifest record_count {m['record_count']} != recomputed {stats.record_count}")
        if stats.reward_range is not None:
            for key, val in (("reward_min", stats.reward_range[0]),
                             ("reward_max", stats.reward_range[1]),
                             ("value_min", stats.value_range[0]),
                             ("value_max", stats.value_range[1])):
                if key in m and abs(float(m[key]) - val) > 1e-6:
                    raise ContractError(f"manifest {key} {m[key]} != recomputed {val}")
    return stats
