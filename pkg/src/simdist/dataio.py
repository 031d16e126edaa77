"""Episode-delimited binary trajectory files.

Layout (all integers little-endian):

    bytes 0..3   magic "SDST"
    bytes 4..7   uint32 format version (1)
    bytes 8..11  uint32 manifest byte length
    manifest     UTF-8 "key = value" lines
    episodes     repeated: uint32 episode id, uint32 length,
                 then length fixed-width float32 records

A record is proprio | extero (row-major) | action, followed by
expert_flag | reward | value when the manifest's has_targets is 1
(simulation data); deployment logs carry observations and actions only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import envs
from .tensorops import ContractError

MAGIC = b"SDST"
VERSION = 1


@dataclass
class EpisodeData:
    episode_id: int
    proprio: np.ndarray  # (L, P)
    extero: np.ndarray   # (L, R, C)
    actions: np.ndarray  # (L, A)
    expert_flag: np.ndarray | None = None  # (L,) 0/1
    rewards: np.ndarray | None = None      # (L,)
    values: np.ndarray | None = None       # (L,)

    def __len__(self):
        return self.proprio.shape[0]


@dataclass
class Dataset:
    manifest: dict
    episodes: list

    @property
    def has_targets(self):
        return self.manifest.get("has_targets") == "1"

    def record_count(self):
        return sum(len(ep) for ep in self.episodes)


def fmt_float(x):
    return repr(float(x))


def env_manifest_items(cfg):
    items = {
        "env.kind": cfg.kind,
        "env.dt": fmt_float(cfg.dt),
        "env.episode_len": str(cfg.episode_len),
        "env.variant": cfg.variant,
    }
    if cfg.kind == envs.SLOT_REACH:
        items.update({
            "env.gain": fmt_float(cfg.gain),
            "env.friction": fmt_float(cfg.friction),
            "env.wind": f"{fmt_float(cfg.wind[0])},{fmt_float(cfg.wind[1])}",
            "env.action_delay": str(cfg.action_delay),
            "env.obs_noise_std": fmt_float(cfg.obs_noise_std),
        })
    else:
        items.update({
            "env.mass": fmt_float(cfg.mass),
            "env.length": fmt_float(cfg.length),
            "env.gravity": fmt_float(cfg.gravity),
            "env.damping": fmt_float(cfg.damping),
            "env.torque_gain": fmt_float(cfg.torque_gain),
        })
    return items


def env_from_manifest(manifest):
    kind = manifest["env.kind"]
    fields = dict(
        kind=kind,
        dt=float(manifest["env.dt"]),
        episode_len=int(manifest["env.episode_len"]),
        variant=manifest.get("env.variant", "nominal"),
    )
    if kind == envs.SLOT_REACH:
        wind = tuple(float(w) for w in manifest["env.wind"].split(","))
        fields.update(gain=float(manifest["env.gain"]),
                      friction=float(manifest["env.friction"]),
                      wind=wind,
                      action_delay=int(manifest["env.action_delay"]),
                      obs_noise_std=float(manifest["env.obs_noise_std"]))
    else:
        fields.update(mass=float(manifest["env.mass"]),
                      length=float(manifest["env.length"]),
                      gravity=float(manifest["env.gravity"]),
                      damping=float(manifest["env.damping"]),
                      torque_gain=float(manifest["env.torque_gain"]))
    return envs.EnvConfig(**fields)


def _record_width(manifest):
    p = int(manifest["proprio_dim"])
    e = int(manifest["extero_rows"]) * int(manifest["extero_cols"])
    a = int(manifest["action_dim"])
    return p + e + a + (3 if manifest["has_targets"] == "1" else 0)


def save_dataset(path, dataset):
    lines = [f"{k} = {dataset.manifest[k]}" for k in sorted(dataset.manifest)]
    manifest_blob = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(manifest_blob)))
        fh.write(manifest_blob)
        for ep in dataset.episodes:
            rows = [ep.proprio.reshape(len(ep), -1),
                    ep.extero.reshape(len(ep), -1),
                    ep.actions.reshape(len(ep), -1)]
            if dataset.has_targets:
                rows += [ep.expert_flag.reshape(-1, 1),
                         ep.rewards.reshape(-1, 1),
                         ep.values.reshape(-1, 1)]
            block = np.concatenate(rows, axis=1).astype("<f4")
            fh.write(struct.pack("<II", ep.episode_id, len(ep)))
            fh.write(block.tobytes())


def load_dataset(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ContractError(f"{path}: bad magic at byte 0")
    version, manifest_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise ContractError(f"{path}: unsupported format version {version}")
    manifest = {}
    for line in blob[12:12 + manifest_len].decode("utf-8").splitlines():
        key, _, value = line.partition(" = ")
        manifest[key] = value

    width = _record_width(manifest)
    p = int(manifest["proprio_dim"])
    rows = int(manifest["extero_rows"])
    cols = int(manifest["extero_cols"])
    a = int(manifest["action_dim"])
    has_targets = manifest["has_targets"] == "1"

    episodes = []
    offset = 12 + manifest_len
    while offset < len(blob):
        if offset + 8 > len(blob):
            raise ContractError(f"{path}: truncated episode header at byte {offset}")
        ep_id, length = struct.unpack("<II", blob[offset:offset + 8])
        offset += 8
        nbytes = length * width * 4
        if offset + nbytes > len(blob):
            raise ContractError(f"{path}: truncated episode {ep_id} at byte {offset}")
        block = np.frombuffer(blob[offset:offset + nbytes], dtype="<f4").reshape(length, width)
        offset += nbytes
        cursor = 0
        proprio = block[:, cursor:cursor + p].copy(); cursor += p
        extero = block[:, cursor:cursor + rows * cols].reshape(length, rows, cols).copy()
        cursor += rows * cols
        actions = block[:, cursor:cursor + a].copy(); cursor += a
        flag = rew = val = None
        if has_targets:
            flag = block[:, cursor].copy()
            rew = block[:, cursor + 1].copy()
            val = block[:, cursor + 2].copy()
        episodes.append(EpisodeData(ep_id, proprio, extero, actions, flag, rew, val))
    return Dataset(manifest, episodes)
