"""Optimizer and schedule tests, including a scalar-loop AdamW oracle."""

import math

import numpy as np
import pytest

from soupkit.nn import ParamVector
from soupkit.optim import (
    AdamWState,
    CosineSchedule,
    CyclicalSchedule,
    adamw_step,
    cosine_lr,
    cyclical_alpha,
    cyclical_t,
    is_collection_point,
)


def _pv(values):
    return ParamVector(np.asarray(values, dtype=np.float64), "sig")


# ---------------------------------------------------------------------------
# AdamW

def _adamw_oracle(p, g_seq, lr, beta1=0.9, beta2=0.999, eps=1e-8, wd=0.01):
    """Pure-Python scalar AdamW, run over a gradient sequence."""
    m = v = 0.0
    for t, g in enumerate(g_seq, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = p - lr * wd * p - lr * m_hat / (math.sqrt(v_hat) + eps)
    return p


def test_adamw_single_step_hand_values():
    # p=1, g=0.5, lr=0.1: m_hat=g, v_hat=g^2, ratio ~ 1 => p' ~ 1 - 0.001 - 0.1
    params = _pv([1.0])
    state = AdamWState.fresh(1)
    new, state2 = adamw_step(params, _pv([0.5]), state, lr=0.1)
    want = 1.0 - 0.1 * 0.01 * 1.0 - 0.1 * 0.5 / (0.5 + 1e-8)
    assert abs(new.values[0] - want) < 1e-15
    assert state2.step_count == 1
    assert state.step_count == 0  # input state untouched


def test_adamw_matches_scalar_oracle_over_steps():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=20)
    p = _pv([2.0])
    state = AdamWState.fresh(1)
    for g in grads:
        p, state = adamw_step(p, _pv([g]), state, lr=0.05)
    want = _adamw_oracle(2.0, grads, lr=0.05)
    assert abs(p.values[0] - want) < 1e-14


def test_adamw_elementwise_independence():
    # vector update must equal per-coordinate scalar updates
    rng = np.random.default_rng(1)
    p0 = rng.normal(size=5)
    g_seq = rng.normal(size=(7, 5))
    p = _pv(p0)
    state = AdamWState.fresh(5)
    for g in g_seq:
        p, state = adamw_step(p, _pv(g), state, lr=0.02)
    for k in range(5):
        want = _adamw_oracle(p0[k], g_seq[:, k], lr=0.02)
        assert abs(p.values[k] - want) < 1e-14


def test_adamw_decay_is_decoupled():
    # zero gradient: the only movement is the weight-decay shrink
    p = _pv([3.0, -2.0])
    new, _ = adamw_step(p, _pv([0.0, 0.0]), AdamWState.fresh(2), lr=0.5)
    np.testing.assert_allclose(new.values, p.values * (1 - 0.5 * 0.01), rtol=0, atol=1e-16)


def test_adamw_zero_lr_is_identity_for_params():
    p = _pv([1.0, 2.0])
    new, state = adamw_step(p, _pv([5.0, -5.0]), AdamWState.fresh(2), lr=0.0)
    assert np.array_equal(new.values, p.values)
    assert state.step_count == 1  # moments still advance


def test_adamw_validation():
    p = _pv([1.0])
    state = AdamWState.fresh(1)
    with pytest.raises(ValueError):
        adamw_step(p, _pv([1.0]), state, lr=-0.1)
    with pytest.raises(ValueError):
        adamw_step(p, _pv([1.0, 2.0]), AdamWState.fresh(2), lr=0.1)
    with pytest.raises(ValueError):
        adamw_step(p, _pv([np.nan]), state, lr=0.1)
    with pytest.raises(ValueError):
        adamw_step(p, ParamVector(np.ones(1), "other"), state, lr=0.1)


def test_adamw_state_validation():
    with pytest.raises(ValueError):
        AdamWState.fresh(2, beta1=1.0)
    with pytest.raises(ValueError):
        AdamWState.fresh(2, eps=0.0)
    with pytest.raises(ValueError):
        AdamWState.fresh(2, weight_decay=-0.01)
    with pytest.raises(ValueError):
        AdamWState(m=np.zeros(2), v=np.zeros(3))
    with pytest.raises(ValueError):
        AdamWState(m=np.zeros(2), v=-np.ones(2))


# ---------------------------------------------------------------------------
# Cyclical schedule

def test_cyclical_t_hand_table():
    # c=4: phases cycle 1/4, 2/4, 3/4, 4/4
    want = [0.25, 0.5, 0.75, 1.0, 0.25, 0.5, 0.75, 1.0]
    got = [cyclical_t(i, 4) for i in range(1, 9)]
    assert got == want


def test_cyclical_alpha_hand_table():
    sched = CyclicalSchedule(cycle_steps=4, alpha1=1.0, alpha2=0.1)
    # t=.25 -> midpoint of descent; t=.5 -> alpha2; t=.75 -> midpoint of ascent; t=1 -> alpha1
    want = [0.55, 0.1, 0.55, 1.0]
    got = [cyclical_alpha(i, sched) for i in range(1, 5)]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)
    # periodic
    assert cyclical_alpha(7, sched) == cyclical_alpha(3, sched)


def test_cyclical_alpha_bounds_and_trough():
    sched = CyclicalSchedule(cycle_steps=10, alpha1=3e-3, alpha2=1e-6)
    vals = [cyclical_alpha(i, sched) for i in range(1, 31)]
    assert min(vals) == sched.alpha2
    assert max(vals) == sched.alpha1
    for i in range(1, 31):
        if is_collection_point(i, 10):
            assert cyclical_alpha(i, sched) == sched.alpha2


def test_collection_points_exhaustive_small():
    # c=6: collection at steps 3, 9, 15, ... (mid-cycle)
    points = [i for i in range(1, 25) if is_collection_point(i, 6)]
    assert points == [3, 9, 15, 21]


def test_collection_point_never_at_cycle_end():
    for c in (2, 4, 8):
        for k in range(1, 4):
            assert not is_collection_point(k * c, c)


def test_cyclical_validation():
    with pytest.raises(ValueError):
        CyclicalSchedule(cycle_steps=3, alpha1=1.0, alpha2=0.1)
    with pytest.raises(ValueError):
        CyclicalSchedule(cycle_steps=0, alpha1=1.0, alpha2=0.1)
    with pytest.raises(ValueError):
        CyclicalSchedule(cycle_steps=4, alpha1=0.1, alpha2=1.0)
    with pytest.raises(ValueError):
        CyclicalSchedule(cycle_steps=4, alpha1=1.0, alpha2=0.0)
    with pytest.raises(ValueError):
        cyclical_t(0, 4)
    with pytest.raises(ValueError):
        cyclical_t(1, 5)


def test_cyclical_schedule_dict_roundtrip():
    sched = CyclicalSchedule(cycle_steps=8, alpha1=1e-2, alpha2=1e-5)
    assert CyclicalSchedule.from_dict(sched.to_dict()) == sched


# ---------------------------------------------------------------------------
# Cosine schedule

def test_cosine_endpoints_and_midpoint():
    sched = CosineSchedule(base_lr=0.1, total_epochs=10, min_lr=0.001)
    assert cosine_lr(0, sched) == pytest.approx(0.1, abs=1e-15)
    assert cosine_lr(10, sched) == pytest.approx(0.001, abs=1e-15)
    assert cosine_lr(5, sched) == pytest.approx((0.1 + 0.001) / 2, abs=1e-15)


def test_cosine_monotone_decreasing():
    sched = CosineSchedule(base_lr=1.0, total_epochs=20)
    vals = [cosine_lr(e, sched) for e in range(21)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_cosine_validation():
    with pytest.raises(ValueError):
        CosineSchedule(base_lr=0.1, total_epochs=0)
    with pytest.raises(ValueError):
        CosineSchedule(base_lr=0.001, total_epochs=5, min_lr=0.01)
    sched = CosineSchedule(base_lr=0.1, total_epochs=5)
    with pytest.raises(ValueError):
        cosine_lr(6, sched)
    with pytest.raises(ValueError):
        cosine_lr(-1, sched)
