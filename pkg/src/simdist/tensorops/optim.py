"""Adam updates and the warmup + cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import component_of
from .tensor import ContractError


@dataclass(frozen=True)
class ScheduleConfig:
    initial_lr: float = 2e-4
    final_lr: float = 1e-4
    warmup_steps: int = 100
    total_steps: int = 1000

    def __post_init__(self):
        if not (0 <= self.warmup_steps < self.total_steps):
            raise ContractError("require 0 <= warmup_steps < total_steps")
        if self.final_lr > self.initial_lr:
            raise ContractError("require final_lr <= initial_lr")


def lr_schedule(step, cfg):
    """Linear ramp to initial_lr, cosine decay to final_lr, then flat."""
    if step < 0:
        raise ContractError("step must be non-negative")
    if step < cfg.warmup_steps:
        return cfg.initial_lr * step / cfg.warmup_steps
    if step >= cfg.total_steps:
        return cfg.final_lr
    frac = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.final_lr + 0.5 * (cfg.initial_lr - cfg.final_lr) * (1.0 + math.cos(math.pi * frac))


def adam_step(store, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard bias-corrected Adam over exactly the unfrozen parameters.

    Frozen parameters (and their moments) are untouched; providing a
    gradient for one is a contract violation.
    """
    unfrozen = store.unfrozen_names()
    extra = set(grads) - set(unfrozen)
    if extra:
        frozen_hits = sorted(n for n in extra if n in store)
        if frozen_hits:
            raise ContractError(f"gradient provided for frozen parameter(s): {frozen_hits}")
        raise ContractError(f"gradient for unknown parameter(s): {sorted(extra)}")
    missing = set(unfrozen) - set(grads)
    if missing:
        raise ContractError(f"missing gradients for unfrozen parameter(s): {sorted(missing)}")

    for name in unfrozen:
        g = np.asarray(grads[name], dtype=np.float32)
        p = store[name]
        if g.shape != p.data.shape:
            raise ContractError(f"gradient shape {g.shape} != param shape {p.data.shape} for '{name}'")
        m, v, t = store.adam_state(name)
        t += 1
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.data = p.data - np.float32(lr) * m_hat / (np.sqrt(v_hat) + np.float32(eps))
        store.set_adam_step(name, t)
    return store


__all__ = ["ScheduleConfig", "lr_schedule", "adam_step", "component_of"]
