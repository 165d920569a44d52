"""Synthetic classification tasks, augmentation, splits, and CSV I/O.

Tasks are Gaussian class clusters in d dimensions. The "smooth" kind is the
benign baseline: balanced classes, clean labels, identical train/test
distributions. The "rough" kind layers on the complications that make
validation scores unreliable guides: heterogeneous cluster covariances, a
shifted pretraining source, class imbalance, a train-to-test covariate
shift, and label noise. Everything is deterministic in the task seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .nn import Batch

# Cluster-mean scale; together with unit base covariance this sets task difficulty.
CLASS_SEPARATION = 2.5
# The ood split shifts this much further along the test-shift direction.
OOD_SHIFT_FACTOR = 2.5

ROLES = ("train", "val", "test", "ood", "source")


class TaskKind(str, Enum):
    SMOOTH = "smooth"
    ROUGH = "rough"


class AugmentLevel(str, Enum):
    MINIMAL = "minimal"
    MEDIUM = "medium"
    HEAVY = "heavy"


# (jitter sigma, dropout probability) per level; overridable per call.
AUGMENT_PARAMS: dict[AugmentLevel, tuple[float, float]] = {
    AugmentLevel.MINIMAL: (0.0, 0.0),
    AugmentLevel.MEDIUM: (0.05, 0.0),
    AugmentLevel.HEAVY: (0.15, 0.1),
}


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    role: str
    task_id: str

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError(f"features must be a non-empty 2-D array, got shape {feats.shape}")
        if labs.shape != (feats.shape[0],):
            raise ValueError(f"labels shape {labs.shape} does not match {feats.shape[0]} rows")
        if not np.issubdtype(labs.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {labs.dtype}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("non-finite features")
        if self.class_count < 2:
            raise ValueError(f"class_count must be at least 2, got {self.class_count}")
        if labs.min() < 0 or labs.max() >= self.class_count:
            raise ValueError(f"labels out of range [0, {self.class_count})")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}, expected one of {ROLES}")
        self.features = feats
        self.labels = labs.astype(np.int64)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dims(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    seed: int
    dims: int
    class_count: int
    n_samples: int
    imbalance_ratio: float = 1.0
    label_noise_rate: float = 0.0
    cluster_heterogeneity: float = 0.0
    shift_magnitude: float = 0.0
    source_shift: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if self.dims < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.class_count < 2:
            raise ValueError(f"class_count must be at least 2, got {self.class_count}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be positive, got {self.n_samples}")
        if self.imbalance_ratio < 1.0:
            raise ValueError(f"imbalance_ratio must be >= 1, got {self.imbalance_ratio}")
        if not 0.0 <= self.label_noise_rate < 1.0:
            raise ValueError(f"label_noise_rate must lie in [0, 1), got {self.label_noise_rate}")
        if self.cluster_heterogeneity < 0.0 or self.shift_magnitude < 0.0 or self.source_shift < 0.0:
            raise ValueError("heterogeneity and shift knobs must be non-negative")
        if self.kind is TaskKind.SMOOTH:
            # The benign kind pins the complications off regardless of caller input.
            object.__setattr__(self, "imbalance_ratio", 1.0)
            object.__setattr__(self, "label_noise_rate", 0.0)
            object.__setattr__(self, "shift_magnitude", 0.0)

    @property
    def task_id(self) -> str:
        return f"{self.kind.value}-{self.seed}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "dims": self.dims,
            "class_count": self.class_count,
            "n_samples": self.n_samples,
            "imbalance_ratio": self.imbalance_ratio,
            "label_noise_rate": self.label_noise_rate,
            "cluster_heterogeneity": self.cluster_heterogeneity,
            "shift_magnitude": self.shift_magnitude,
            "source_shift": self.source_shift,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(**d)


@dataclass
class TaskBundle:
    source: LabeledDataset
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset
    ood: LabeledDataset

    def splits(self) -> dict[str, LabeledDataset]:
        return {"source": self.source, "train": self.train, "val": self.val, "test": self.test, "ood": self.ood}


def _allocate_counts(n: int, priors: np.ndarray) -> np.ndarray:
    """Largest-remainder allocation of n rows to classes by prior weight."""
    exact = priors * n
    counts = np.floor(exact).astype(int)
    short = n - counts.sum()
    order = np.argsort(-(exact - counts), kind="mergesort")
    counts[order[:short]] += 1
    return counts


def _split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    if len(ratios) != 3 or any(r <= 0.0 for r in ratios):
        raise ValueError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n_val = int(np.floor(n * ratios[1]))
    n_test = int(np.floor(n * ratios[2]))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split of {n} rows by {ratios} leaves an empty part")
    return n_train, n_val, n_test


def _sample_cluster_split(
    rng: np.random.Generator,
    n: int,
    means: np.ndarray,
    stds: np.ndarray,
    priors: np.ndarray,
    offset: np.ndarray,
    noise_rate: float,
) -> tuple[np.ndarray, np.ndarray]:
    n_classes, dims = means.shape
    counts = _allocate_counts(n, priors)
    feats = np.empty((n, dims))
    labels = np.empty(n, dtype=np.int64)
    pos = 0
    for c in range(n_classes):
        k = counts[c]
        feats[pos : pos + k] = means[c] + offset + rng.normal(size=(k, dims)) * stds[c]
        labels[pos : pos + k] = c
        pos += k
    if noise_rate > 0.0:
        flip = rng.random(n) < noise_rate
        bump = rng.integers(1, n_classes, size=n)
        labels[flip] = (labels[flip] + bump[flip]) % n_classes
    perm = rng.permutation(n)
    return feats[perm], labels[perm]


def gen_task(spec: TaskSpec, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)) -> TaskBundle:
    """Build all five splits of a task deterministically from its seed."""
    if spec.n_samples < spec.class_count:
        raise ValueError(f"degenerate spec: {spec.n_samples} samples for {spec.class_count} classes")
    ss = np.random.SeedSequence([0xDA7A, int(spec.seed)])
    r_struct, r_source, r_train, r_val, r_test, r_ood = [np.random.default_rng(s) for s in ss.spawn(6)]

    c, d, h = spec.class_count, spec.dims, spec.cluster_heterogeneity
    means = CLASS_SEPARATION * r_struct.normal(size=(c, d)) / np.sqrt(d)
    scale = 1.0 + h * r_struct.random(c)
    stds = scale[:, None] * np.exp(0.25 * h * r_struct.normal(size=(c, d)))
    if spec.imbalance_ratio > 1.0:
        weights = spec.imbalance_ratio ** ((c - 1 - np.arange(c)) / (c - 1))
    else:
        weights = np.ones(c)
    priors = weights / weights.sum()
    shift_dir = r_struct.normal(size=d)
    shift_dir /= np.linalg.norm(shift_dir)
    source_dir = r_struct.normal(size=d)
    source_dir /= np.linalg.norm(source_dir)

    n_train, n_val, n_test = _split_sizes(spec.n_samples, ratios)
    uniform = np.ones(c) / c
    zero = np.zeros(d)
    parts = {
        "source": _sample_cluster_split(r_source, spec.n_samples, means, stds, uniform, spec.source_shift * source_dir, 0.0),
        "train": _sample_cluster_split(r_train, n_train, means, stds, priors, zero, spec.label_noise_rate),
        "val": _sample_cluster_split(r_val, n_val, means, stds, priors, zero, spec.label_noise_rate),
        "test": _sample_cluster_split(r_test, n_test, means, stds, priors, spec.shift_magnitude * shift_dir, 0.0),
        "ood": _sample_cluster_split(r_ood, n_test, means, stds, priors, OOD_SHIFT_FACTOR * spec.shift_magnitude * shift_dir, 0.0),
    }
    sets = {
        role: LabeledDataset(f, l, class_count=c, role=role, task_id=spec.task_id)
        for role, (f, l) in parts.items()
    }
    return TaskBundle(**sets)


def split(dataset: LabeledDataset, ratios: tuple[float, float, float], seed: int) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Disjoint, exhaustive train/val/test partition by seeded shuffle."""
    n_train, n_val, n_test = _split_sizes(dataset.n, ratios)
    perm = np.random.default_rng(np.random.SeedSequence([0x5B11, int(seed)])).permutation(dataset.n)
    out = []
    bounds = [(0, n_train, "train"), (n_train, n_train + n_val, "val"), (n_train + n_val, dataset.n, "test")]
    for lo, hi, role in bounds:
        idx = perm[lo:hi]
        out.append(
            LabeledDataset(dataset.features[idx], dataset.labels[idx], dataset.class_count, role, dataset.task_id)
        )
    return out[0], out[1], out[2]


def augment(batch: Batch, level: AugmentLevel | str, rng: np.random.Generator,
            sigma: float | None = None, dropout_p: float | None = None) -> Batch:
    """Feature-space augmentation; labels pass through untouched."""
    level = AugmentLevel(level)
    base_sigma, base_p = AUGMENT_PARAMS[level]
    sigma = base_sigma if sigma is None else sigma
    dropout_p = base_p if dropout_p is None else dropout_p
    if sigma == 0.0 and dropout_p == 0.0:
        return batch
    feats = batch.features + rng.normal(0.0, sigma, size=batch.features.shape)
    if dropout_p > 0.0:
        feats = feats * (rng.random(batch.features.shape) >= dropout_p)
    return Batch(feats, batch.labels)


def save_csv(dataset: LabeledDataset, path: str | Path) -> None:
    """Feature columns then the label column; floats as shortest round-trip repr."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.dims)] + ["label"])
        for row, lab in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(x)) for x in row] + [int(lab)])


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path: str | Path, label_column: int | str = "label",
             role: str = "train", task_id: str | None = None,
             class_count: int | None = None) -> LabeledDataset:
    """Read a dataset; header row auto-detected, label column by name or index."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header: list[str] | None = None
    if any(not _is_number(cell) for cell in rows[0]):
        header = rows[0]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no data rows")
    if isinstance(label_column, str):
        if header is None:
            raise ValueError(f"{path}: label column {label_column!r} needs a header row")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ValueError(f"{path}: no column named {label_column!r} in header {header}") from None
    else:
        label_idx = label_column
    width = len(rows[0])
    if not -width <= label_idx < width:
        raise ValueError(f"{path}: label column {label_idx} out of range for {width} columns")
    label_idx %= width
    feats = np.empty((len(rows), width - 1))
    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(f"{path}: row {i + 1}, column {j + 1}: non-numeric cell {cell!r}") from None
            if j == label_idx:
                if value != int(value):
                    raise ValueError(f"{path}: row {i + 1}, column {j + 1}: non-integer label {cell!r}")
                labels[i] = int(value)
            else:
                feats[i, j if j < label_idx else j - 1] = value
    inferred = int(labels.max()) + 1 if labels.size else 0
    return LabeledDataset(
        feats, labels,
        class_count=class_count if class_count is not None else max(inferred, 2),
        role=role,
        task_id=task_id if task_id is not None else path.stem,
    )
