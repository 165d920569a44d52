"""Weight-space model merging: uniform and greedy soups, per-base local
soups over cyclical snapshots, and the two-level hierarchical variants.

Hierarchical methods build one local soup per base model (uniform lower
level for "gou", greedy for "gog"), score each on validation data, and run
a greedy soup across the local results. Greedy acceptance keeps ties, so
the final validation score never drops below the best single candidate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .data import LabeledDataset
from .nn import ArchSpec, MetricKind, ParamVector, evaluate
from .pipeline import Checkpoint, HyperConfig, Lineage


class LineageError(ValueError):
    """Members come from incompatible lineages and cannot be merged."""


class SoupMethod(str, Enum):
    UNIFORM = "uniform"
    GREEDY = "greedy"
    GOU = "gou"
    GOG = "gog"

    @property
    def lower_level(self) -> "SoupMethod | None":
        if self is SoupMethod.GOU:
            return SoupMethod.UNIFORM
        if self is SoupMethod.GOG:
            return SoupMethod.GREEDY
        return None


@dataclass(frozen=True)
class AuditEntry:
    candidate_id: str
    trial_score: float
    accepted: bool

    def to_dict(self) -> dict:
        return {"candidate_id": self.candidate_id, "trial_score": self.trial_score, "accepted": self.accepted}


@dataclass
class SoupResult:
    params: ParamVector
    method: SoupMethod
    members: list[str]
    val_score: float | None
    audit: list[AuditEntry] = field(default_factory=list)
    level_members: dict[str, list[str]] | None = None
    local_audits: dict[str, list[AuditEntry]] | None = None

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a soup must have at least one member")

    @property
    def id(self) -> str:
        payload = self.method.value + "|" + "|".join(self.members)
        return f"soup-{hashlib.sha256(payload.encode('ascii')).hexdigest()[:12]}"

    def audit_dict(self) -> dict:
        out: dict = {
            "method": self.method.value,
            "members": list(self.members),
            "val_score": self.val_score,
            "decisions": [a.to_dict() for a in self.audit],
        }
        if self.level_members is not None:
            out["level_members"] = {k: list(v) for k, v in self.level_members.items()}
        if self.local_audits is not None:
            out["local_decisions"] = {k: [a.to_dict() for a in v] for k, v in self.local_audits.items()}
        return out


def uniform_soup(members: Sequence[ParamVector]) -> ParamVector:
    """Elementwise mean, computed in a canonical member order.

    Members are sorted by raw bytes before summing, which makes the result
    exactly permutation-invariant, and differences are accumulated against
    an anchor so a soup of identical vectors returns that vector bit for bit.
    """
    if not members:
        raise ValueError("cannot soup an empty member list")
    signatures = {m.arch_signature for m in members}
    if len(signatures) > 1:
        raise ValueError(f"members span multiple architectures: {sorted(signatures)}")
    sizes = {m.size for m in members}
    if len(sizes) > 1:
        raise ValueError(f"members have mismatched lengths: {sorted(sizes)}")
    order = sorted(range(len(members)), key=lambda i: members[i].values.tobytes())
    anchor = members[order[0]].values
    if len(members) == 1:
        return ParamVector(anchor.copy(), members[0].arch_signature)
    acc = np.zeros_like(anchor)
    for i in order[1:]:
        acc += members[i].values - anchor
    return ParamVector(anchor + acc / len(members), members[0].arch_signature)


def _check_roots(candidates: Sequence[Checkpoint]) -> None:
    roots = {c.lineage.root_id for c in candidates if c.lineage.root_id is not None}
    if len(roots) > 1:
        raise LineageError(f"members descend from different warmstarts: {sorted(roots)}")


def _make_evaluator(candidates: Sequence[Checkpoint], metric: MetricKind | str,
                    val: LabeledDataset | None,
                    evaluate_fn: Callable[[ParamVector], float] | None) -> Callable[[ParamVector], float]:
    if evaluate_fn is not None:
        return evaluate_fn
    if val is None:
        raise ValueError("need either evaluate_fn or a validation dataset")
    arch = candidates[0].arch
    return lambda p: evaluate(p, arch, val, metric)


def greedy_soup(
    candidates: Sequence[Checkpoint],
    metric: MetricKind | str,
    val: LabeledDataset | None = None,
    evaluate_fn: Callable[[ParamVector], float] | None = None,
) -> SoupResult:
    """Classic greedy soup: seed with the best validation candidate, then
    trial-average each remaining candidate in descending score order and
    keep it whenever the trial validation score does not drop.

    Ranking uses each candidate's recorded validation metric when present,
    falling back to the evaluator; ranking ties break on candidate id.
    """
    if not candidates:
        raise ValueError("cannot soup an empty candidate list")
    metric_key = MetricKind(metric).value
    _check_roots(candidates)
    eval_fn = _make_evaluator(candidates, metric_key, val, evaluate_fn)

    def rank_score(c: Checkpoint) -> float:
        if metric_key in c.val_metrics:
            return c.val_metrics[metric_key]
        return eval_fn(c.params)

    ordered = sorted(candidates, key=lambda c: (-rank_score(c), c.id))
    best = ordered[0]
    member_params: list[ParamVector] = [best.params]
    members = [best.id]
    current_params = uniform_soup(member_params)
    current = rank_score(best)
    audit = [AuditEntry(best.id, current, True)]
    for cand in ordered[1:]:
        trial = uniform_soup(member_params + [cand.params])
        score = eval_fn(trial)
        accepted = score >= current
        audit.append(AuditEntry(cand.id, score, accepted))
        if accepted:
            member_params.append(cand.params)
            members.append(cand.id)
            current_params = trial
            current = score
    return SoupResult(params=current_params, method=SoupMethod.GREEDY,
                      members=members, val_score=current, audit=audit)


def local_soup(
    theta_t: Checkpoint,
    fissions: Sequence[Checkpoint],
    lower_method: SoupMethod | str = SoupMethod.UNIFORM,
    metric: MetricKind | str | None = None,
    val: LabeledDataset | None = None,
    evaluate_fn: Callable[[ParamVector], float] | None = None,
) -> SoupResult:
    """Merge one base model with its own cyclical snapshots.

    Uniform averages the base together with all m snapshots (weight
    1/(m+1) each); greedy treats the base as an ordinary candidate. With no
    snapshots both collapse to the base model exactly.
    """
    lower = SoupMethod(lower_method)
    if lower not in (SoupMethod.UNIFORM, SoupMethod.GREEDY):
        raise ValueError(f"lower level must be uniform or greedy, got {lower.value}")
    for f in fissions:
        if f.lineage.base_id != theta_t.id:
            raise LineageError(f"snapshot {f.id} descends from {f.lineage.base_id}, not {theta_t.id}")
    group = [theta_t, *fissions]
    if lower is SoupMethod.GREEDY:
        result = greedy_soup(group, metric if metric is not None else MetricKind.ACCURACY,
                             val=val, evaluate_fn=evaluate_fn)
        return result
    params = uniform_soup([c.params for c in group])
    score = None
    if evaluate_fn is not None:
        score = evaluate_fn(params)
    elif val is not None and metric is not None:
        score = evaluate(params, theta_t.arch, val, metric)
    return SoupResult(params=params, method=SoupMethod.UNIFORM,
                      members=[c.id for c in group], val_score=score)


def hierarchical_soup(
    groups: Sequence[tuple[Checkpoint, Sequence[Checkpoint]]],
    method: SoupMethod | str,
    metric: MetricKind | str,
    val: LabeledDataset | None = None,
    evaluate_fn: Callable[[ParamVector], float] | None = None,
) -> SoupResult:
    """Two-level soup over (base, snapshots) groups.

    Lower level: one local soup per group, uniform for gou, greedy for gog.
    Top level: always a greedy soup across the scored local results.
    """
    method = SoupMethod(method)
    if method not in (SoupMethod.GOU, SoupMethod.GOG):
        raise ValueError(f"hierarchical method must be gou or gog, got {method.value}")
    if not groups:
        raise ValueError("need at least one (base, snapshots) group")
    metric_key = MetricKind(metric).value
    bases = [g[0] for g in groups]
    _check_roots(bases)
    eval_fn = _make_evaluator(bases, metric_key, val, evaluate_fn)

    pseudo: list[Checkpoint] = []
    level_members: dict[str, list[str]] = {}
    local_audits: dict[str, list[AuditEntry]] = {}
    for theta_t, fissions in groups:
        local = local_soup(theta_t, fissions, method.lower_level,
                           metric=metric_key, evaluate_fn=eval_fn)
        local_id = f"local-{theta_t.id}"
        score = local.val_score if local.val_score is not None else eval_fn(local.params)
        pseudo.append(
            Checkpoint(
                id=local_id, arch=theta_t.arch, params=local.params, config=theta_t.config,
                lineage=Lineage("soup", base_id=theta_t.id, root_id=theta_t.lineage.root_id),
                val_metrics={metric_key: score}, epochs_consumed=0.0,
                trained_on=theta_t.trained_on,
            )
        )
        level_members[local_id] = list(local.members)
        local_audits[local_id] = list(local.audit)
    top = greedy_soup(pseudo, metric_key, evaluate_fn=eval_fn)
    return SoupResult(
        params=top.params, method=method, members=top.members,
        val_score=top.val_score, audit=top.audit,
        level_members=level_members, local_audits=local_audits,
    )
