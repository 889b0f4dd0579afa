from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyntopk.model import Item, TermProfile
from dyntopk.planner import (
    CostConstants,
    ExactFraction,
    Global,
    Optimal,
    ProbeRunStats,
    Zero,
    calibrate,
    optimal_theta,
    parse_strategy,
    predicted_cost,
    score_cap,
    theta_for_item,
)

ITEM = Item("i1", TermProfile({"a": 1}))


def _c(**kw):
    base = dict(a=1.0, b=0.0, C_M=1.0, C_T=1.0, theta_max=1.0, E=1.0)
    base.update(kw)
    return CostConstants(**base)


def test_strategies():
    assert theta_for_item(ITEM, Zero()) == 0.0
    assert theta_for_item(ITEM, ExactFraction(0.5, {"i1": 2.0})) == 1.0
    assert theta_for_item(ITEM, Global(0.05)) == 0.05
    assert theta_for_item(ITEM, Optimal(_c())) == 1.0
    with pytest.raises(ValueError):
        theta_for_item(ITEM, ExactFraction(0.5))


def test_score_cap_only_for_prescanned_strategies():
    assert score_cap(ITEM, ExactFraction(0.5, {"i1": 2.0})) == 2.0
    assert score_cap(ITEM, Global(1.0)) == math.inf


def test_optimal_theta_examples():
    c = CostConstants(a=100, b=0, C_M=50, C_T=0.1, theta_max=2, E=20)
    assert optimal_theta(c) == pytest.approx(math.sqrt(0.5))
    assert optimal_theta(_c(theta_max=3.0, E=3.0)) == 1.0
    with pytest.raises(ZeroDivisionError):
        optimal_theta(_c(a=0.0))


def test_predicted_cost_linear_without_fixed_costs():
    c = _c(b=0.0, C_M=0.0, a=2.0, E=3.0, C_T=0.5)
    assert predicted_cost(2.0, c) == pytest.approx(2 * predicted_cost(1.0, c))
    with pytest.raises(ValueError):
        predicted_cost(0.0, c)


positive = st.floats(0.01, 100.0, allow_nan=False)


@given(positive, positive, positive, positive, positive, positive)
def test_optimum_beats_grid(a, b, c_m, c_t, theta_max, e):
    c = CostConstants(a=a, b=b, C_M=c_m, C_T=c_t, theta_max=theta_max, E=e)
    grid = np.linspace(theta_max / 1000, theta_max, 1000)
    best_grid = min(predicted_cost(float(t), c) for t in grid)
    opt = optimal_theta(c)
    if opt <= theta_max:
        assert predicted_cost(opt, c) <= best_grid * (1 + 1e-9)
    else:
        costs = [predicted_cost(float(t), c) for t in grid]
        assert int(np.argmin(costs)) == len(grid) - 1


def test_calibrate_exact_fit():
    stats = ProbeRunStats()
    for theta in (0.5, 1.0, 2.0):
        stats.refreshes += [(theta, int(100 * theta), 0.01 * theta)] * 3
    stats.match_times = [0.002] * 10
    stats.probe_time = 0.5
    stats.probes = 5
    stats.items = [(4.0, 4), (6.0, 6), (0.0, 0)]
    c = calibrate(stats)
    assert c.a == pytest.approx(100.0)
    assert c.b == pytest.approx(0.01)
    assert c.C_T == pytest.approx(0.1)
    assert c.C_M == pytest.approx(0.002)
    # items without events do not dilute the averages
    assert c.theta_max == 5.0 and c.E == 5.0


def test_calibrate_needs_two_thresholds():
    stats = ProbeRunStats(refreshes=[(1.0, 10, 0.1)] * 4, match_times=[0.1], probe_time=1.0, probes=1, items=[(1.0, 1)])
    with pytest.raises(ValueError):
        calibrate(stats)


def test_constants_text_roundtrip():
    c = CostConstants(a=1.5, b=0.25, C_M=3e-5, C_T=1e-7, theta_max=9.99, E=9.99)
    assert CostConstants.from_text("# fitted\n" + c.to_text()) == c
    with pytest.raises(ValueError):
        CostConstants.from_text("a=1\n")
    with pytest.raises(ValueError):
        _c(a=-1.0)


def test_parse_strategy(tmp_path):
    assert parse_strategy("zero") == Zero()
    assert parse_strategy("global:0.05") == Global(0.05)
    frac = parse_strategy("fraction:1/3", {"i1": 3.0})
    assert theta_for_item(ITEM, frac) == pytest.approx(1.0)
    path = tmp_path / "c.txt"
    path.write_text(_c().to_text())
    assert theta_for_item(ITEM, parse_strategy(f"optimal:{path}")) == 1.0
    for bad in ("bogus", "fraction:-1", "global:x", "fraction:1/0"):
        with pytest.raises(ValueError):
            parse_strategy(bad)
