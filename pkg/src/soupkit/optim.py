"""AdamW with decoupled weight decay, plus the learning-rate schedules.

Two schedules: per-epoch cosine annealing for ordinary fine-tuning, and a
triangular cyclical schedule indexed by optimizer step. Mid-cycle steps of
the cyclical schedule (where the rate bottoms out at alpha2) are the
snapshot-collection points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .nn import ParamVector


@dataclass(frozen=True)
class AdamWState:
    """First/second moment estimates and the completed step count."""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self) -> None:
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError(f"betas must lie in (0, 1), got ({self.beta1}, {self.beta2})")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight decay must be non-negative, got {self.weight_decay}")
        if self.m.shape != self.v.shape:
            raise ValueError(f"moment shape mismatch: {self.m.shape} vs {self.v.shape}")
        if self.step_count < 0:
            raise ValueError("step_count must be non-negative")
        if np.any(self.v < 0.0):
            raise ValueError("second moments must be non-negative")

    @classmethod
    def fresh(cls, n_params: int, **kwargs) -> "AdamWState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), step_count=0, **kwargs)


def adamw_step(params: ParamVector, grads: ParamVector, state: AdamWState, lr: float) -> tuple[ParamVector, AdamWState]:
    """One decoupled-weight-decay update; returns new params and state."""
    if lr < 0.0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    if params.size != grads.size or params.size != state.m.size:
        raise ValueError(
            f"size mismatch: params {params.size}, grads {grads.size}, state {state.m.size}"
        )
    if params.arch_signature != grads.arch_signature:
        raise ValueError("gradient signature does not match parameters")
    if not np.all(np.isfinite(grads.values)):
        raise ValueError("non-finite gradient")
    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads.values
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads.values**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_values = (
        params.values
        - lr * state.weight_decay * params.values
        - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    )
    return ParamVector(new_values, params.arch_signature), replace(state, m=m, v=v, step_count=t)


@dataclass(frozen=True)
class CyclicalSchedule:
    """Triangular cycle over optimizer steps: peak alpha1, trough alpha2."""

    cycle_steps: int
    alpha1: float
    alpha2: float

    def __post_init__(self) -> None:
        if self.cycle_steps < 2 or self.cycle_steps % 2 != 0:
            raise ValueError(f"cycle length must be a positive even integer, got {self.cycle_steps}")
        if self.alpha1 <= 0.0 or self.alpha2 <= 0.0:
            raise ValueError(f"rates must be positive, got alpha1={self.alpha1}, alpha2={self.alpha2}")
        if self.alpha2 > self.alpha1:
            raise ValueError(f"alpha2 must not exceed alpha1, got {self.alpha2} > {self.alpha1}")

    def to_dict(self) -> dict:
        return {"cycle_steps": self.cycle_steps, "alpha1": self.alpha1, "alpha2": self.alpha2}

    @classmethod
    def from_dict(cls, d: dict) -> "CyclicalSchedule":
        return cls(d["cycle_steps"], d["alpha1"], d["alpha2"])


def _check_step(i: int, c: int) -> None:
    if i < 1:
        raise ValueError(f"step index is 1-based, got {i}")
    if c < 2 or c % 2 != 0:
        raise ValueError(f"cycle length must be a positive even integer, got {c}")


def cyclical_t(i: int, c: int) -> float:
    """Phase in (0, 1]: position of 1-based step i within its cycle of length c."""
    _check_step(i, c)
    return (1.0 / c) * ((i - 1) % c + 1)


def cyclical_alpha(i: int, schedule: CyclicalSchedule) -> float:
    """Triangular rate: descends to alpha2 at mid-cycle, climbs back to alpha1."""
    t = cyclical_t(i, schedule.cycle_steps)
    a1, a2 = schedule.alpha1, schedule.alpha2
    if t <= 0.5:
        return a2 * (2.0 * t) + a1 * (1.0 - 2.0 * t)
    return a1 * (2.0 * t - 1.0) + a2 * (2.0 - 2.0 * t)


def is_collection_point(i: int, c: int) -> bool:
    """True at the mid-cycle step, where the rate equals alpha2."""
    _check_step(i, c)
    return (i - 1) % c + 1 == c // 2


@dataclass(frozen=True)
class CosineSchedule:
    base_lr: float
    total_epochs: int
    min_lr: float = 0.0

    def __post_init__(self) -> None:
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be positive, got {self.total_epochs}")
        if self.min_lr < 0.0 or self.base_lr < self.min_lr:
            raise ValueError(f"need base_lr >= min_lr >= 0, got base={self.base_lr}, min={self.min_lr}")


def cosine_lr(epoch: int, schedule: CosineSchedule) -> float:
    """Half-cosine decay from base_lr (epoch 0) to min_lr (epoch total_epochs)."""
    if epoch < 0 or epoch > schedule.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.total_epochs}]")
    span = schedule.base_lr - schedule.min_lr
    return schedule.min_lr + 0.5 * span * (1.0 + np.cos(np.pi * epoch / schedule.total_epochs))
