"""Dense network engine over flat parameter vectors.

Small fully-connected classifiers in float64 numpy: forward pass, analytic
gradients of the cross-entropy loss, and the classification metrics used for
model selection. Parameters travel as a single flat vector so that
weight-space operations (averaging, interpolation, plane slices) stay
trivial and exact.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .data import LabeledDataset

ACTIVATIONS = ("relu", "tanh")


class MetricUndefinedError(ValueError):
    """The requested metric has no defined value on the given labels."""


class MetricKind(str, Enum):
    ACCURACY = "accuracy"
    MACRO_F1 = "macro_f1"
    MACRO_RECALL = "macro_recall"
    ROC_AUC_OVR = "roc_auc_ovr"


@dataclass(frozen=True)
class ArchSpec:
    """Layer widths (input, hidden..., output) plus hidden activation."""

    layer_dims: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2:
            raise ValueError(f"need at least input and output dims, got {dims}")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer dims must be positive, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")

    @cached_property
    def signature(self) -> str:
        payload = ",".join(str(d) for d in self.layer_dims) + "|" + self.activation
        return hashlib.sha256(payload.encode("ascii")).hexdigest()[:16]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per linear layer."""
        return list(zip(self.layer_dims[:-1], self.layer_dims[1:]))

    @property
    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())

    def to_dict(self) -> dict:
        return {"layer_dims": list(self.layer_dims), "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(tuple(d["layer_dims"]), d["activation"])


@dataclass
class ParamVector:
    """Flat float64 parameter vector tied to an architecture signature.

    Layout per layer: weight matrix in row-major order, then bias vector.
    """

    values: np.ndarray
    arch_signature: str

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise ValueError(f"parameter vector must be 1-D, got shape {vals.shape}")
        self.values = vals

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.arch_signature)

    @property
    def size(self) -> int:
        return int(self.values.size)


@dataclass
class Batch:
    """A minibatch of rows: float64 features and integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        if labs.ndim != 1:
            raise ValueError(f"labels must be 1-D, got shape {labs.shape}")
        if feats.shape[0] != labs.shape[0]:
            raise ValueError(f"row count mismatch: {feats.shape[0]} features vs {labs.shape[0]} labels")
        if labs.size and not np.issubdtype(labs.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {labs.dtype}")
        self.features = feats
        self.labels = labs.astype(np.int64)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])


def init_params(arch: ArchSpec, seed: int) -> ParamVector:
    """Seeded random initialization: He for relu, Glorot for tanh; zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence([0x1A17, int(seed)]))
    chunks = []
    for fan_in, fan_out in arch.layer_shapes():
        if arch.activation == "relu":
            std = np.sqrt(2.0 / fan_in)
        else:
            std = np.sqrt(2.0 / (fan_in + fan_out))
        w = rng.normal(0.0, std, size=(fan_in, fan_out))
        chunks.append(w.ravel())
        chunks.append(np.zeros(fan_out))
    return ParamVector(np.concatenate(chunks), arch.signature)


def unpack_params(params: ParamVector, arch: ArchSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of (W, b) per layer; W has shape (fan_in, fan_out)."""
    _check_signature(params, arch)
    if params.size != arch.param_count:
        raise ValueError(f"expected {arch.param_count} parameters, got {params.size}")
    out = []
    offset = 0
    for fan_in, fan_out in arch.layer_shapes():
        w = params.values[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params.values[offset : offset + fan_out]
        offset += fan_out
        out.append((w, b))
    return out


def pack_params(layers: Sequence[tuple[np.ndarray, np.ndarray]], arch: ArchSpec) -> ParamVector:
    chunks = []
    for (w, b), (fan_in, fan_out) in zip(layers, arch.layer_shapes()):
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ValueError(f"layer shape mismatch: got W{w.shape} b{b.shape}, expected ({fan_in},{fan_out})")
        chunks.append(np.asarray(w, dtype=np.float64).ravel())
        chunks.append(np.asarray(b, dtype=np.float64))
    return ParamVector(np.concatenate(chunks), arch.signature)


def last_layer_slice(arch: ArchSpec) -> slice:
    """Flat-vector slice holding the final linear layer (weights and bias)."""
    fan_in, fan_out = arch.layer_shapes()[-1]
    return slice(arch.param_count - (fan_in * fan_out + fan_out), arch.param_count)


def _check_signature(params: ParamVector, arch: ArchSpec) -> None:
    if params.arch_signature != arch.signature:
        raise ValueError(
            f"parameter vector signature {params.arch_signature} does not match architecture {arch.signature}"
        )


def _activation_fn(name: str) -> Callable[[np.ndarray], np.ndarray]:
    if name == "relu":
        return lambda z: np.maximum(z, 0.0)
    return np.tanh


def _forward_cached(params: ParamVector, arch: ArchSpec, features: np.ndarray):
    """Forward pass keeping pre-activations and activations for backprop."""
    layers = unpack_params(params, arch)
    act = _activation_fn(arch.activation)
    a = features
    pres: list[np.ndarray] = []
    acts: list[np.ndarray] = [a]
    for idx, (w, b) in enumerate(layers):
        z = a @ w + b
        pres.append(z)
        a = act(z) if idx < len(layers) - 1 else z
        acts.append(a)
    return pres, acts, layers


def forward(params: ParamVector, arch: ArchSpec, batch: Batch) -> np.ndarray:
    """Logits for a batch; activation on hidden layers only, none on the last."""
    if batch.features.shape[1] != arch.input_dim:
        raise ValueError(f"feature dim {batch.features.shape[1]} does not match input dim {arch.input_dim}")
    if batch.n and (batch.labels.min() < 0 or batch.labels.max() >= arch.class_count):
        raise ValueError(f"labels out of range [0, {arch.class_count})")
    _, acts, _ = _forward_cached(params, arch, batch.features)
    return acts[-1]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood, computed via a stable log-sum-exp."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be 2-D, got shape {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match logits rows {logits.shape[0]}")
    if logits.shape[0] == 0:
        raise ValueError("cannot take loss of an empty batch")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError(f"labels out of range [0, {logits.shape[1]})")
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(logits.shape[0]), labels]
    return float(np.mean(lse - picked))


def gradient(params: ParamVector, arch: ArchSpec, batch: Batch) -> ParamVector:
    """Analytic gradient of the mean cross-entropy over the batch."""
    if batch.n == 0:
        raise ValueError("cannot take gradient of an empty batch")
    if batch.features.shape[1] != arch.input_dim:
        raise ValueError(f"feature dim {batch.features.shape[1]} does not match input dim {arch.input_dim}")
    if batch.labels.min() < 0 or batch.labels.max() >= arch.class_count:
        raise ValueError(f"labels out of range [0, {arch.class_count})")
    pres, acts, layers = _forward_cached(params, arch, batch.features)
    n = batch.n
    delta = softmax(acts[-1])
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for li in range(len(layers) - 1, -1, -1):
        a_prev = acts[li]
        grads[li] = (a_prev.T @ delta, delta.sum(axis=0))
        if li > 0:
            w, _ = layers[li]
            delta = delta @ w.T
            if arch.activation == "relu":
                delta = delta * (pres[li - 1] > 0.0)
            else:
                delta = delta * (1.0 - acts[li] ** 2)
    return pack_params(grads, arch)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the average rank of their group."""
    order = np.argsort(x, kind="mergesort")
    s = x[order]
    n = s.size
    starts = np.r_[0, np.flatnonzero(s[1:] != s[:-1]) + 1]
    ends = np.r_[starts[1:], n]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def binary_roc_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Rank-statistic AUC; tied scores get 0.5 pair credit."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = int(positives.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("ROC-AUC needs both positive and negative rows")
    ranks = _average_ranks(scores)
    u = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _macro_recall(labels: np.ndarray, preds: np.ndarray) -> float:
    recalls = []
    for c in np.unique(labels):
        mask = labels == c
        recalls.append(float((preds[mask] == c).sum()) / float(mask.sum()))
    return float(np.mean(recalls))


def _macro_f1(labels: np.ndarray, preds: np.ndarray) -> float:
    f1s = []
    for c in np.unique(labels):
        tp = float(((preds == c) & (labels == c)).sum())
        fp = float(((preds == c) & (labels != c)).sum())
        fn = float(((preds != c) & (labels == c)).sum())
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1s.append(2.0 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0)
    return float(np.mean(f1s))


def evaluate(params: ParamVector, arch: ArchSpec, dataset: "LabeledDataset", metric: MetricKind | str) -> float:
    """Score in [0, 1] for the dataset under the given metric (higher is better)."""
    metric = MetricKind(metric)
    if dataset.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    batch = Batch(dataset.features, dataset.labels)
    logits = forward(params, arch, batch)
    labels = batch.labels
    preds = np.argmax(logits, axis=1)
    if metric is MetricKind.ACCURACY:
        return int((preds == labels).sum()) / int(labels.size)
    if metric is MetricKind.MACRO_RECALL:
        return _macro_recall(labels, preds)
    if metric is MetricKind.MACRO_F1:
        return _macro_f1(labels, preds)
    present = np.unique(labels)
    if present.size < 2:
        raise MetricUndefinedError("ROC-AUC is undefined with a single class present")
    probs = softmax(logits)
    aucs = [binary_roc_auc(probs[:, c], labels == c) for c in present]
    return float(np.mean(aucs))
