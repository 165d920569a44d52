"""Experiment config plumbing and the in-memory recipe helpers.

The statistical claims behind the default recipes (method orderings,
landscape contrast, barrier ordering) are exercised in test_acceptance.py;
here we only cover the config surface and the cheap invariants.
"""

import json

import numpy as np
import pytest

from soupkit.data import TaskKind, gen_task
from soupkit.experiment import (
    DEFAULT_ARCH,
    ExperimentConfig,
    build_soups,
    cycle_schedule,
    default_experiment_config,
    default_task_spec,
    headline_metric,
    run_experiment,
)
from soupkit.nn import MetricKind, evaluate
from soupkit.store import Store


def _tiny_config(name="tiny", seed=1, soups=("uniform", "greedy", "gou", "gog")):
    cfg = default_experiment_config(name, "rough", seed, soups=soups)
    d = cfg.to_dict()
    d["task"]["n_samples"] = 240
    d["task"]["dims"] = 4
    d["arch"] = {"layer_dims": [4, 8, 3], "activation": "relu"}
    d["pretrain"]["epochs"] = 2
    d["warmup"]["epochs"] = 1
    d["grid"].update(lrs=[0.01, 0.003, 0.001], augments=["minimal"], seeds=[0], epochs=1)
    d["fgg"].update(lrs=[0.01, 0.003], epochs=1, n_collect=2)
    d["analysis"] = {"lmc_points": 5, "landscape_resolution": [4, 4]}
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------------------
# Config surface

def test_config_json_roundtrip(tmp_path):
    cfg = default_experiment_config("demo", "rough", 3)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg


def test_config_rejects_unknown_schema():
    d = default_experiment_config("demo", "rough", 0).to_dict()
    d["schema_version"] = 99
    with pytest.raises(ValueError, match="schema"):
        ExperimentConfig.from_dict(d)


def test_config_rejects_missing_required_keys():
    d = default_experiment_config("demo", "rough", 0).to_dict()
    del d["metric"]
    with pytest.raises(ValueError, match="metric"):
        ExperimentConfig.from_dict(d)


def test_config_rejects_unknown_soup():
    with pytest.raises(ValueError, match="unknown soup"):
        default_experiment_config("demo", "rough", 0, soups=("uniform", "magic"))


def test_config_soup_sections_must_exist():
    cfg = default_experiment_config("demo", "rough", 0)
    d = cfg.to_dict()
    d["grid"] = None
    with pytest.raises(ValueError, match="grid"):
        ExperimentConfig.from_dict(d)
    d = cfg.to_dict()
    d["fgg"] = None
    with pytest.raises(ValueError, match="fgg"):
        ExperimentConfig.from_dict(d)


def test_config_rejects_pathy_names():
    with pytest.raises(ValueError, match="name"):
        default_experiment_config("a/b", "rough", 0)


def test_default_task_families():
    rough = default_task_spec("rough", 4)
    assert rough.task_id == "rough-4"
    assert rough.imbalance_ratio > 1.0 and rough.label_noise_rate > 0.0
    smooth = default_task_spec("smooth", 4)
    # benign kind pins the complications off
    assert smooth.imbalance_ratio == 1.0 and smooth.label_noise_rate == 0.0
    assert headline_metric("smooth") is MetricKind.ACCURACY
    assert headline_metric("rough") is MetricKind.MACRO_RECALL


def test_cycle_schedule_steps():
    # 204 rows at batch 32 -> 7 steps/epoch, 2 epochs -> c = 14
    sched = cycle_schedule(2, 204, 32, 1e-3, 1e-6)
    assert sched.cycle_steps == 14
    assert sched.alpha1 == 1e-3 and sched.alpha2 == 1e-6


# ---------------------------------------------------------------------------
# build_soups

def test_build_soups_names_and_membership():
    cfg = _tiny_config()
    bundle = gen_task(cfg.task, cfg.split_ratios)
    from soupkit.experiment import _fgg_stage, _fit_stage, _grid_stage

    _, theta0 = _fit_stage(cfg, bundle)
    grid, _ = _grid_stage(cfg, theta0, bundle)
    _, groups, _ = _fgg_stage(cfg, theta0, bundle)
    soups = build_soups(["uniform", "greedy", "gou", "gog", "fgg_uniform",
                         "fgg_greedy", "gs_gou", "gs_gog"],
                        cfg.metric, cfg.arch, bundle.val, grid, groups)
    by_name = dict(soups)
    assert sorted(by_name["uniform"].members) == sorted(c.id for c in grid)
    assert set(by_name["greedy"].members) <= {c.id for c in grid}
    pool = {c.id for base, fissions in groups for c in (base, *fissions)}
    assert set(by_name["fgg_uniform"].members) == pool
    assert by_name["gou"].level_members is not None
    assert by_name["gs_gog"].level_members is not None
    for name, soup in soups:
        assert soup.val_score is not None, name
    # every hierarchical top level is greedy over locals, so it can only
    # improve on the best single local group
    eval_fn = lambda p: evaluate(p, cfg.arch, bundle.val, cfg.metric)
    for name in ("gou", "gog"):
        soup = by_name[name]
        locals_ = soup.level_members
        assert all(k.startswith("local-") for k in locals_)
        assert soup.val_score == pytest.approx(eval_fn(soup.params))


# ---------------------------------------------------------------------------
# run_experiment determinism

def test_run_experiment_writes_identical_bytes_twice(tmp_path):
    cfg = _tiny_config()
    artifacts = ("report.csv", "budget.csv", "lmc_curve.csv", "landscape.csv",
                 "summary.json", "config.json")
    payloads = []
    for sub in ("a", "b"):
        store = Store(tmp_path / sub)
        summary = run_experiment(cfg, store)
        exp = store.experiment_dir(cfg.name)
        payloads.append({f: (exp / f).read_bytes() for f in artifacts})
        assert summary["failures"] == []
    assert payloads[0] == payloads[1]


def test_run_experiment_is_rerunnable_in_place(tmp_path):
    cfg = _tiny_config()
    store = Store(tmp_path)
    first = run_experiment(cfg, store)
    second = run_experiment(cfg, store)  # exist_ok path: verify, don't rewrite
    assert first["checkpoints"] == second["checkpoints"]
    assert first["soups"] == second["soups"]
