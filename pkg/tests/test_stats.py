import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from szilard import optimal
from szilard.engine import DEFAULT_GRID, LN2, Jump, Protocol, Ramp, conditional_propagator, discretize, piecewise_constant_protocol, propagate_control
from szilard.stats import (EnginePerformance, WorkStatistics, branch_performance, cycle_performance,
                           efficiency, fdr_residual, fluctuation_integral, mean_estimator, raw_moment,
                           variance_estimator, variance_of_variance_central, variance_of_variance_raw,
                           work_deterministic, work_variance)

levels_st = st.lists(st.floats(-6.0, 6.0), min_size=1, max_size=8)


def flat(duration=2.0):
    return Protocol(0, [Ramp.linear(duration, LN2, LN2)])


def pairwise_variance(proto, p0):
    """Direct double sum over increment pairs using the conditional propagator."""
    ctrl = discretize(proto)
    p = propagate_control(p0, ctrl)
    d, t = ctrl.increments, ctrl.times
    var = sum(d[k] ** 2 * p[k] * (1 - p[k]) for k in range(d.size))
    for k in range(d.size):
        for j in range(k):
            q = conditional_propagator(proto, t[j], t[k])
            var += 2 * d[j] * d[k] * p[j] * (q - p[k])
    return var


def test_constant_protocol_has_no_work_or_fluctuation():
    assert work_deterministic(flat()) == 0.0
    assert fluctuation_integral(flat()) == 0.0


def test_start_jump_costs_nothing_from_empty():
    proto = Protocol(0, [Jump(LN2, 4.0), Ramp.linear(1e-9, 4.0, 4.0)], boundary=None)
    assert work_deterministic(proto, p0=0.0) == 0.0
    assert fluctuation_integral(proto, p0=0.0) == 0.0


def test_quasistatic_limit_reaches_landauer():
    # slow enough that the occupation follows equilibrium: W -> ln 2
    w = work_deterministic(optimal.build_optimal_protocol(200.0)[0])
    assert 0.97 * LN2 < w < LN2


@given(levels_st, st.floats(0.05, 2.0), st.sampled_from([0, 1]))
def test_variance_recursion_matches_pairwise_sum(levels, dt, branch):
    proto = piecewise_constant_protocol(levels, dt, branch)
    assert work_variance(proto, grid_points=2) == pytest.approx(
        pairwise_variance(proto, float(branch)), rel=1e-9, abs=1e-12)


def test_fluctuation_integral_convergence_order():
    proto = optimal.naive_ramp(1.0, 0)
    ref = fluctuation_integral(proto, grid_points=16385)
    errs = [abs(fluctuation_integral(proto, grid_points=n + 1) - ref) for n in (64, 128, 256)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.8


@pytest.mark.parametrize("gt", [0.1, 1.0, 10.0, 50.0])
def test_work_grid_converged_at_default_resolution(gt):
    proto, _ = optimal.build_optimal_protocol(gt)
    a = work_deterministic(proto, grid_points=DEFAULT_GRID)
    b = work_deterministic(proto, grid_points=2 * DEFAULT_GRID)
    assert abs(a - b) < 1e-4


def test_efficiency_values():
    assert efficiency(LN2) == 1.0
    assert efficiency(0.0) == 0.0
    assert efficiency(0.5 * LN2) == pytest.approx(0.5)


def test_efficiency_bound_for_generated_protocols():
    for gt in (0.1, 1.0, 10.0, 100.0):
        for b in (0, 1):
            proto, _ = optimal.build_optimal_protocol(gt, branch=b)
            assert branch_performance(proto).efficiency <= 1 + 1e-9
            assert branch_performance(optimal.naive_ramp(gt, b)).efficiency <= 1 + 1e-9


def test_fdr_guard_path():
    res, relative = fdr_residual(LN2, 0.0, 1.0)
    assert res == 0.0 and relative is False


def test_fdr_slow_and_fast():
    def residual(gt):
        perfs = [branch_performance(optimal.build_optimal_protocol(gt, branch=b)[0]) for b in (0, 1)]
        return cycle_performance(*perfs).fdr_residual
    assert abs(residual(0.1)) > 0.5
    assert abs(residual(50.0)) < 0.15


def test_cycle_performance_law_of_total_variance():
    a = EnginePerformance.from_moments(2.0, 0.1, 0.4)
    b = EnginePerformance.from_moments(2.0, 0.3, 0.2)
    c = cycle_performance(a, b)
    assert c.work == pytest.approx(0.2)
    assert c.fluctuation * 2.0 == pytest.approx(0.3 + 0.01)
    with pytest.raises(ValueError):
        cycle_performance(a, EnginePerformance.from_moments(3.0, 0.1, 0.1))


# --- estimators ----------------------------------------------------------

def test_small_examples():
    assert mean_estimator([1, 2, 3])[0] == 2.0
    v, err = variance_estimator([1, 2, 3])
    assert v == 1.0 and math.isnan(err)
    assert variance_estimator([1, 2, 3, 2, 2])[0] == pytest.approx(0.5)
    assert raw_moment([1, 2, 3], 2) == pytest.approx(14 / 3)
    assert mean_estimator([4.2] * 10) == (pytest.approx(4.2), 0.0)


def test_estimator_preconditions():
    with pytest.raises(ValueError):
        mean_estimator([1.0])
    with pytest.raises(ValueError):
        variance_estimator([1.0])


def test_mean_of_normal_draws():
    x = np.random.default_rng(5).standard_normal(10_000)
    assert abs(mean_estimator(x)[0]) < 4 / math.sqrt(x.size)


def test_variance_unbiased():
    x = np.random.default_rng(6).exponential(2.0, (10_000, 50))
    v = np.mean([variance_estimator(row)[0] for row in x])
    assert v == pytest.approx(4.0, rel=0.01)


def test_central_form_calibrated():
    data = np.random.default_rng(8).uniform(0, 1, (10_000, 100))
    empirical = data.var(axis=1, ddof=1).var(ddof=1)
    n = 100
    exact = (1 / 80 - (1 / 12) ** 2 * (n - 3) / (n - 1)) / n
    assert empirical == pytest.approx(exact, rel=0.1)
    plug = np.mean([variance_of_variance_central(r) for r in data])
    assert plug == pytest.approx(empirical, rel=0.1)


@given(st.floats(-100, 100))
def test_central_form_is_shift_invariant(c):
    x = np.random.default_rng(9).normal(size=200)
    assert variance_of_variance_central(x + c) == pytest.approx(variance_of_variance_central(x), rel=1e-6)


def test_raw_form_is_not_shift_invariant():
    x = np.random.default_rng(9).normal(size=200)
    assert variance_of_variance_raw(x + 5.0) != pytest.approx(variance_of_variance_raw(x), rel=0.1)


def test_work_statistics_bundle():
    x = np.random.default_rng(1).normal(1.0, 2.0, 500)
    s = WorkStatistics.from_samples(x)
    d = s.as_dict()
    assert d["n_samples"] == 500
    assert set(d["raw_moments"]) == {"m2", "m3", "m4"}
    assert s.var_work_err > 0 and s.var_work_err_raw_formula > 0
