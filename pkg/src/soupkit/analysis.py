"""Weight-space analysis: linear interpolation curves, 2-D landscape slices
through three models, local-minima counting, OOD report tables, and
training-cost bookkeeping.

Scores follow the engine convention (higher is better, in [0, 1]); landscape
cells hold validation error, i.e. one minus the score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import LabeledDataset
from .nn import ArchSpec, MetricKind, MetricUndefinedError, ParamVector, evaluate
from .pipeline import Checkpoint

DEFAULT_LMC_POINTS = 11
DEFAULT_RESOLUTION = (25, 25)
DEFAULT_EXTENT_MARGIN = 0.2


class DegeneratePlaneError(ValueError):
    """The three anchor models do not span a 2-D plane."""


@dataclass
class LmcCurve:
    endpoint_a: str
    endpoint_b: str
    metric: str
    lambdas: np.ndarray
    scores: np.ndarray

    def barrier(self) -> float:
        """Worst dip below the weaker endpoint along the path (0 if none)."""
        return float(min(self.scores[0], self.scores[-1]) - self.scores.min())

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "score"])
            for lam, s in zip(self.lambdas, self.scores):
                w.writerow([repr(float(lam)), repr(float(s))])


def lmc_sweep(a: Checkpoint, b: Checkpoint, n_points: int,
              dataset: LabeledDataset, metric: MetricKind | str) -> LmcCurve:
    """Score lam*A + (1-lam)*B at evenly spaced lam in [0, 1].

    lam=0 evaluates B's exact weights and lam=1 evaluates A's.
    """
    if n_points < 2:
        raise ValueError(f"need at least two interpolation points, got {n_points}")
    if a.arch.signature != b.arch.signature:
        raise ValueError("endpoints have different architectures")
    metric = MetricKind(metric)
    lambdas = np.linspace(0.0, 1.0, n_points)
    scores = np.empty(n_points)
    for i, lam in enumerate(lambdas):
        mixed = ParamVector(lam * a.params.values + (1.0 - lam) * b.params.values, a.params.arch_signature)
        scores[i] = evaluate(mixed, a.arch, dataset, metric)
    return LmcCurve(a.id, b.id, metric.value, lambdas, scores)


@dataclass
class PlaneBasis:
    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    anchor_coords: np.ndarray  # 3 x 2, rows ordered like the input anchors
    anchor_ids: tuple[str, str, str]
    arch: ArchSpec

    def point(self, x: float, y: float) -> ParamVector:
        return ParamVector(self.origin + x * self.u + y * self.v, self.arch.signature)


def plane_basis(theta1: Checkpoint, theta2: Checkpoint, theta3: Checkpoint) -> PlaneBasis:
    """Orthonormal 2-D slice through three models, origin at the first.

    u points along theta2 - theta1; v is the Gram-Schmidt remainder of
    theta3 - theta1. Collinear or coincident anchors are rejected.
    """
    sigs = {theta1.arch.signature, theta2.arch.signature, theta3.arch.signature}
    if len(sigs) > 1:
        raise ValueError("anchors have different architectures")
    origin = theta1.params.values
    d2 = theta2.params.values - origin
    d3 = theta3.params.values - origin
    n2 = np.linalg.norm(d2)
    scale = max(np.linalg.norm(origin), n2, np.linalg.norm(d3), 1.0)
    if n2 <= 1e-12 * scale:
        raise DegeneratePlaneError("first two anchors coincide")
    u = d2 / n2
    resid = d3 - (d3 @ u) * u
    n3 = np.linalg.norm(resid)
    if n3 <= 1e-12 * scale:
        raise DegeneratePlaneError("anchors are collinear")
    v = resid / n3
    coords = np.array([[0.0, 0.0], [n2, 0.0], [d3 @ u, n3]])
    return PlaneBasis(origin.copy(), u, v, coords, (theta1.id, theta2.id, theta3.id), theta1.arch)


def default_extent(anchor_coords: np.ndarray, margin: float = DEFAULT_EXTENT_MARGIN) -> tuple[float, float, float, float]:
    """Anchor bounding box padded by `margin` of its size on every side."""
    xs, ys = anchor_coords[:, 0], anchor_coords[:, 1]
    dx = (xs.max() - xs.min()) * margin
    dy = (ys.max() - ys.min()) * margin
    return (xs.min() - dx, xs.max() + dx, ys.min() - dy, ys.max() + dy)


@dataclass
class LandscapeGrid:
    basis: PlaneBasis
    extent: tuple[float, float, float, float]
    resolution: tuple[int, int]
    metric: str
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # error surface, shape (len(ys), len(xs))

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "error"])
            for i, y in enumerate(self.ys):
                for j, x in enumerate(self.xs):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[i, j]))])


def landscape_grid(basis: PlaneBasis, extent: tuple[float, float, float, float],
                   resolution: tuple[int, int], dataset: LabeledDataset,
                   metric: MetricKind | str) -> LandscapeGrid:
    """Validation-error surface over the slice; values[i][j] is the cell at
    (xs[j], ys[i])."""
    metric = MetricKind(metric)
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError(f"resolution must be at least 2x2, got {resolution}")
    xmin, xmax, ymin, ymax = extent
    if not (xmin < xmax and ymin < ymax):
        raise ValueError(f"empty extent {extent}")
    xs = np.linspace(xmin, xmax, nx)
    ys = np.linspace(ymin, ymax, ny)
    values = np.empty((ny, nx))
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            values[i, j] = 1.0 - evaluate(basis.point(x, y), basis.arch, dataset, metric)
    return LandscapeGrid(basis, tuple(extent), (nx, ny), metric.value, xs, ys, values)


def count_local_minima(values: np.ndarray | LandscapeGrid) -> int:
    """Interior cells strictly below all eight neighbours."""
    if isinstance(values, LandscapeGrid):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 3 or values.shape[1] < 3:
        return 0
    count = 0
    for i in range(1, values.shape[0] - 1):
        for j in range(1, values.shape[1] - 1):
            cell = values[i, j]
            block = values[i - 1 : i + 2, j - 1 : j + 2]
            if np.sum(block < cell) == 0 and np.sum(block == cell) == 1:
                count += 1
    return count


@dataclass
class ReportRow:
    label: str
    entry_id: str
    scores: dict[str, float | None]  # column name -> score, None when undefined


@dataclass
class ReportTable:
    metric: str
    columns: list[str]
    rows: list[ReportRow]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "id", *self.columns])
            for row in self.rows:
                cells = [row.label, row.entry_id]
                for col in self.columns:
                    s = row.scores.get(col)
                    cells.append("undefined" if s is None else repr(float(s)))
                w.writerow(cells)


def _entry_parts(entry) -> tuple[str, ParamVector]:
    # Checkpoints and soup results both expose id and params.
    return entry.id, entry.params


def ood_report(entries: Sequence[tuple[str, object]], id_test: LabeledDataset,
               ood_sets: Sequence[LabeledDataset], metric: MetricKind | str,
               arch: ArchSpec) -> ReportTable:
    """Score every entry on the in-distribution test set and each OOD set."""
    metric = MetricKind(metric)
    columns = ["id_test"]
    seen: dict[str, int] = {}
    for ds in ood_sets:
        name = f"{ds.task_id}:{ds.role}"
        if name in seen:
            seen[name] += 1
            name = f"{name}#{seen[name]}"
        else:
            seen[name] = 0
        columns.append(name)
    rows = []
    for label, entry in entries:
        entry_id, params = _entry_parts(entry)
        scores: dict[str, float | None] = {}
        for col, ds in zip(columns, [id_test, *ood_sets]):
            try:
                scores[col] = evaluate(params, arch, ds, metric)
            except MetricUndefinedError:
                scores[col] = None
        rows.append(ReportRow(label, entry_id, scores))
    return ReportTable(metric.value, columns, rows)


@dataclass
class BudgetReport:
    stage_epochs: dict[str, float]
    grid_total: float
    fgg_total: float
    ratio: float | None

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "epochs"])
            for stage, total in sorted(self.stage_epochs.items()):
                w.writerow([f"stage:{stage}", repr(total)])
            w.writerow(["grid_total", repr(self.grid_total)])
            w.writerow(["fgg_total", repr(self.fgg_total)])
            w.writerow(["fgg_over_grid_ratio", "undefined" if self.ratio is None else repr(self.ratio)])


def compute_budget(checkpoints: Sequence[Checkpoint]) -> BudgetReport:
    """Sum per-run training epochs by lineage stage.

    fgg_total covers base models plus their cyclical snapshots; the ratio
    compares that against the plain grid total and is None without a grid.
    """
    stage_epochs: dict[str, float] = {}
    for ck in checkpoints:
        stage = ck.lineage.stage
        stage_epochs[stage] = stage_epochs.get(stage, 0.0) + float(ck.epochs_consumed)
    grid_total = stage_epochs.get("grid", 0.0)
    fgg_total = stage_epochs.get("base", 0.0) + stage_epochs.get("fission", 0.0)
    ratio = fgg_total / grid_total if grid_total > 0.0 else None
    return BudgetReport(stage_epochs, grid_total, fgg_total, ratio)
