"""Training stages: source pretraining, linear-probe warmup, fine-tuning,
hyperparameter grids, and cyclical-schedule snapshot generation.

Every stage is deterministic in its config seed and returns Checkpoints
whose ids are content-derived, so re-running a stage reproduces both the
weights and the identifiers bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import AugmentLevel, LabeledDataset, augment
from .nn import (
    ArchSpec,
    Batch,
    MetricKind,
    MetricUndefinedError,
    ParamVector,
    evaluate,
    gradient,
    init_params,
    last_layer_slice,
)
from .optim import AdamWState, CosineSchedule, CyclicalSchedule, adamw_step, cosine_lr, cyclical_alpha

log = logging.getLogger(__name__)

STAGES = ("pretrained", "warmstart", "grid", "base", "fission", "soup")

# Stream tags keep the rng draws of different stages independent.
_RNG_PRETRAIN, _RNG_WARMUP, _RNG_TUNE, _RNG_FISSION = 11, 22, 33, 44


class TrainingDivergedError(RuntimeError):
    """Loss or parameters became non-finite during training."""


@dataclass(frozen=True)
class Lineage:
    stage: str
    base_id: str | None = None
    cycle_index: int | None = None
    root_id: str | None = None

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}, expected one of {STAGES}")

    def to_dict(self) -> dict:
        return {"stage": self.stage, "base_id": self.base_id,
                "cycle_index": self.cycle_index, "root_id": self.root_id}

    @classmethod
    def from_dict(cls, d: dict) -> "Lineage":
        return cls(d["stage"], d.get("base_id"), d.get("cycle_index"), d.get("root_id"))


@dataclass(frozen=True)
class HyperConfig:
    lr: float
    seed: int
    augment: AugmentLevel = AugmentLevel.MINIMAL
    epochs: int = 1
    warmup_epochs: int = 0
    batch_size: int = 32
    schedule: str = "cosine"
    cyclical: CyclicalSchedule | None = None
    weight_decay: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "augment", AugmentLevel(self.augment))
        if self.lr <= 0.0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0 or self.warmup_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.schedule not in ("cosine", "cyclical"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if (self.schedule == "cyclical") != (self.cyclical is not None):
            raise ValueError("cyclical settings required exactly when schedule='cyclical'")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "seed": self.seed,
            "augment": self.augment.value,
            "epochs": self.epochs,
            "warmup_epochs": self.warmup_epochs,
            "batch_size": self.batch_size,
            "schedule": self.schedule,
            "cyclical": self.cyclical.to_dict() if self.cyclical else None,
            "weight_decay": self.weight_decay,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperConfig":
        d = dict(d)
        if d.get("cyclical"):
            d["cyclical"] = CyclicalSchedule.from_dict(d["cyclical"])
        return cls(**d)


@dataclass
class Checkpoint:
    id: str
    arch: ArchSpec
    params: ParamVector
    config: HyperConfig | None
    lineage: Lineage
    val_metrics: dict[str, float]
    epochs_consumed: float
    trained_on: str = ""

    @property
    def root_id(self) -> str | None:
        return self.lineage.root_id


@dataclass(frozen=True)
class GridFailure:
    config: HyperConfig
    error: str


@dataclass
class FissionResult:
    checkpoints: list[Checkpoint]
    truncated: bool
    capture_steps: list[int]


def _data_tag(dataset: LabeledDataset) -> str:
    return f"{dataset.task_id}/{dataset.role}/{dataset.n}"


def checkpoint_id(stage: str, arch: ArchSpec, config: HyperConfig | None,
                  base_id: str | None, cycle_index: int | None, data_tag: str) -> str:
    """Content-derived id: same stage, config, lineage, and data give the same id."""
    payload = json.dumps(
        {
            "stage": stage,
            "arch": arch.signature,
            "config": config.to_dict() if config else None,
            "base": base_id,
            "cycle": cycle_index,
            "data": data_tag,
        },
        sort_keys=True,
    )
    return f"{stage}-{hashlib.sha256(payload.encode('ascii')).hexdigest()[:12]}"


def val_metric_map(params: ParamVector, arch: ArchSpec, val: LabeledDataset) -> dict[str, float]:
    """All supported metrics on the validation split; undefined ones are omitted."""
    out = {}
    for kind in MetricKind:
        try:
            out[kind.value] = evaluate(params, arch, val, kind)
        except MetricUndefinedError:
            pass
    return out


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([0x7E55, int(seed), tag]))


def steps_per_epoch(n_rows: int, batch_size: int) -> int:
    return math.ceil(n_rows / batch_size)


def _train_loop(
    params: ParamVector,
    arch: ArchSpec,
    train: LabeledDataset,
    config: HyperConfig,
    lr_for_step: Callable[[int], float],
    total_steps: int,
    rng: np.random.Generator,
    trainable: slice | None = None,
    collect_steps: frozenset[int] = frozenset(),
    collect_out: list[tuple[int, ParamVector]] | None = None,
) -> tuple[ParamVector, list[tuple[int, ParamVector]]]:
    """Minibatch AdamW over shuffled epochs; steps are 1-based.

    When `trainable` is given, only that flat slice is updated and the rest
    of the vector is left bitwise untouched (the optimizer state covers the
    slice alone, so weight decay cannot leak into frozen coordinates).
    Snapshots land in `collect_out` as they happen, so a caller that traps a
    divergence still sees everything collected before it.
    """
    n = train.n
    spe = steps_per_epoch(n, config.batch_size)
    params = params.copy()
    width = params.size if trainable is None else (trainable.stop - trainable.start)
    state = AdamWState.fresh(width, weight_decay=config.weight_decay)
    collected: list[tuple[int, ParamVector]] = [] if collect_out is None else collect_out
    step = 0
    while step < total_steps:
        perm = rng.permutation(n)
        for b in range(spe):
            if step >= total_steps:
                break
            step += 1
            rows = perm[b * config.batch_size : (b + 1) * config.batch_size]
            batch = augment(Batch(train.features[rows], train.labels[rows]), config.augment, rng)
            # divergence is detected by the explicit checks below, so the
            # transient overflow warnings on the way there are just noise
            with np.errstate(over="ignore", invalid="ignore"):
                grads = gradient(params, arch, batch)
            if not np.all(np.isfinite(grads.values)):
                raise TrainingDivergedError(f"non-finite gradient at step {step}/{total_steps}")
            lr = lr_for_step(step)
            if trainable is None:
                params, state = adamw_step(params, grads, state, lr)
            else:
                sub_p = ParamVector(params.values[trainable], params.arch_signature)
                sub_g = ParamVector(grads.values[trainable], grads.arch_signature)
                sub_p, state = adamw_step(sub_p, sub_g, state, lr)
                merged = params.values.copy()
                merged[trainable] = sub_p.values
                params = ParamVector(merged, params.arch_signature)
            if not np.all(np.isfinite(params.values)):
                raise TrainingDivergedError(f"non-finite parameters at step {step}/{total_steps}")
            if step in collect_steps:
                collected.append((step, params.copy()))
    return params, collected


def pretrain_source(arch: ArchSpec, source: LabeledDataset, config: HyperConfig) -> Checkpoint:
    """Train from a seeded init on the source distribution; 0 epochs = init only."""
    params = init_params(arch, config.seed)
    if config.epochs > 0:
        sched = CosineSchedule(config.lr, config.epochs)
        spe = steps_per_epoch(source.n, config.batch_size)
        params, _ = _train_loop(
            params, arch, source, config,
            lambda step: cosine_lr((step - 1) // spe, sched),
            config.epochs * spe,
            _rng(config.seed, _RNG_PRETRAIN),
        )
    cid = checkpoint_id("pretrained", arch, config, None, None, _data_tag(source))
    return Checkpoint(
        id=cid, arch=arch, params=params, config=config,
        lineage=Lineage("pretrained"), val_metrics={},
        epochs_consumed=float(config.epochs), trained_on=_data_tag(source),
    )


def linear_probe_warmup(pretrained: Checkpoint, train: LabeledDataset, config: HyperConfig,
                        val: LabeledDataset | None = None) -> Checkpoint:
    """Update only the final layer for warmup_epochs; the body stays bitwise frozen."""
    arch = pretrained.arch
    head = last_layer_slice(arch)
    params = pretrained.params.copy()
    if config.warmup_epochs > 0:
        spe = steps_per_epoch(train.n, config.batch_size)
        params, _ = _train_loop(
            params, arch, train, config,
            lambda step: config.lr,
            config.warmup_epochs * spe,
            _rng(config.seed, _RNG_WARMUP),
            trainable=head,
        )
    cid = checkpoint_id("warmstart", arch, config, pretrained.id, None, _data_tag(train))
    return Checkpoint(
        id=cid, arch=arch, params=params, config=config,
        lineage=Lineage("warmstart", base_id=pretrained.id, root_id=cid),
        val_metrics=val_metric_map(params, arch, val) if val is not None else {},
        epochs_consumed=float(config.warmup_epochs), trained_on=_data_tag(train),
    )


def _root_of(checkpoint: Checkpoint) -> str | None:
    return checkpoint.lineage.root_id


def fine_tune(theta0: Checkpoint, train: LabeledDataset, val: LabeledDataset,
              config: HyperConfig, stage: str = "grid") -> Checkpoint:
    """Full fine-tuning from a warmstart with per-epoch cosine decay."""
    if stage in ("grid", "base") and config.schedule != "cosine":
        raise ValueError(f"{stage} runs use the cosine schedule, got {config.schedule!r}")
    arch = theta0.arch
    sched = CosineSchedule(config.lr, max(config.epochs, 1))
    spe = steps_per_epoch(train.n, config.batch_size)
    params, _ = _train_loop(
        theta0.params, arch, train, config,
        lambda step: cosine_lr((step - 1) // spe, sched),
        config.epochs * spe,
        _rng(config.seed, _RNG_TUNE),
    )
    cid = checkpoint_id(stage, arch, config, theta0.id, None, _data_tag(train))
    return Checkpoint(
        id=cid, arch=arch, params=params, config=config,
        lineage=Lineage(stage, base_id=theta0.id, root_id=_root_of(theta0) or theta0.id),
        val_metrics=val_metric_map(params, arch, val),
        epochs_consumed=float(config.epochs), trained_on=_data_tag(train),
    )


def grid_generate(
    theta0: Checkpoint,
    lrs: list[float],
    augments: list[AugmentLevel | str],
    seeds: list[int],
    train: LabeledDataset,
    val: LabeledDataset,
    template: HyperConfig,
) -> tuple[list[Checkpoint], list[GridFailure]]:
    """Fine-tune θ0 once per (lr, augment, seed) cell; diverged cells are recorded."""
    checkpoints: list[Checkpoint] = []
    failures: list[GridFailure] = []
    for lr in lrs:
        for aug in augments:
            for seed in seeds:
                cfg = replace(template, lr=lr, augment=AugmentLevel(aug), seed=seed,
                              schedule="cosine", cyclical=None)
                try:
                    checkpoints.append(fine_tune(theta0, train, val, cfg, stage="grid"))
                except TrainingDivergedError as exc:
                    log.warning("grid cell diverged: lr=%g augment=%s seed=%d (%s)", lr, aug, seed, exc)
                    failures.append(GridFailure(cfg, str(exc)))
    return checkpoints, failures


def fgg_base_generate(
    theta0: Checkpoint,
    lrs: list[float],
    train: LabeledDataset,
    val: LabeledDataset,
    template: HyperConfig,
) -> tuple[list[Checkpoint], list[GridFailure]]:
    """One base model per learning rate; augment and seed are held fixed."""
    checkpoints: list[Checkpoint] = []
    failures: list[GridFailure] = []
    for lr in lrs:
        cfg = replace(template, lr=lr, schedule="cosine", cyclical=None)
        try:
            checkpoints.append(fine_tune(theta0, train, val, cfg, stage="base"))
        except TrainingDivergedError as exc:
            log.warning("base run diverged: lr=%g (%s)", lr, exc)
            failures.append(GridFailure(cfg, str(exc)))
    return checkpoints, failures


def fission_total_steps(schedule: CyclicalSchedule, n_collect: int) -> int:
    """Steps to reach the n-th mid-cycle collection point and stop there."""
    if n_collect < 1:
        raise ValueError(f"n_collect must be positive, got {n_collect}")
    return (n_collect - 1) * schedule.cycle_steps + schedule.cycle_steps // 2


def fgg_fission(base: Checkpoint, schedule: CyclicalSchedule, n_collect: int,
                train: LabeledDataset, val: LabeledDataset) -> FissionResult:
    """Continue training a base model under the triangular cyclical schedule,
    snapshotting at every mid-cycle trough. Optimizer state starts fresh.

    On mid-run divergence the snapshots collected so far are returned with
    the truncated flag set.
    """
    if base.config is None:
        raise ValueError("base checkpoint has no config to derive the fission run from")
    config = replace(base.config, schedule="cyclical", cyclical=schedule)
    arch = base.arch
    c = schedule.cycle_steps
    total = fission_total_steps(schedule, n_collect)
    targets = [c // 2 + k * c for k in range(n_collect)]
    spe = steps_per_epoch(train.n, config.batch_size)
    truncated = False
    collected: list[tuple[int, ParamVector]] = []
    try:
        _train_loop(
            base.params, arch, train, config,
            lambda step: cyclical_alpha(step, schedule),
            total,
            _rng(config.seed, _RNG_FISSION),
            collect_steps=frozenset(targets),
            collect_out=collected,
        )
    except TrainingDivergedError as exc:
        log.warning("fission from %s truncated after %d snapshots: %s", base.id, len(collected), exc)
        truncated = True
    checkpoints = []
    prev = 0
    for k, (step, params) in enumerate(collected, start=1):
        cid = checkpoint_id("fission", arch, config, base.id, k, _data_tag(train))
        checkpoints.append(
            Checkpoint(
                id=cid, arch=arch, params=params, config=config,
                lineage=Lineage("fission", base_id=base.id, cycle_index=k,
                                root_id=_root_of(base) or base.id),
                val_metrics=val_metric_map(params, arch, val),
                epochs_consumed=(step - prev) / spe, trained_on=_data_tag(train),
            )
        )
        prev = step
    return FissionResult(checkpoints, truncated, [s for s, _ in collected])
