import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from szilard import optimal
from szilard.bruteforce import brute_force_optimum, work_and_gradient
from szilard.engine import LN2, Jump, Ramp, propagate_protocol
from szilard.stats import work_deterministic

ks = st.floats(1e-3, 50.0)
ps = st.floats(0.0, 0.999)

# frozen from a dense log-K scan of work_for_k (independent of the optimizer)
KAPPA = {(0.1, 0): 0.28192, (1.0, 0): 0.136563, (10.0, 0): 0.0110207,
         (0.1, 1): 0.39544, (1.0, 1): 0.153384, (10.0, 1): 0.008829}


def test_discriminant_examples():
    assert optimal.discriminant(0.0, 3.0) == pytest.approx(36.0)
    assert optimal.discriminant(1.0, 3.0) == pytest.approx(9.0)
    assert optimal.discriminant(0.5, 1.0) == pytest.approx(5.25)


def test_pdot_examples():
    assert optimal.pdot_optimal(0.0, 2.0) == pytest.approx(1.0)
    assert optimal.pdot_optimal(1.0, 0.7) == pytest.approx(0.0, abs=1e-15)
    for k in (0.01, 0.5, 3.0):
        assert optimal.pdot_optimal(0.0, k) == pytest.approx(2 * k / (2 + k), rel=1e-14)


def test_integrand_limits():
    # dt/dp at p = 0 is (2 + K) / (2K); the energy at p = 0 is ln(2/K)
    assert optimal.time_integrand(0.0, 0.5) == pytest.approx(2.5, rel=1e-14)
    assert optimal.energy_of_p(0.0, 0.2) == pytest.approx(math.log(10.0), rel=1e-14)
    assert optimal.energy_of_p(0.0, 0.2) == pytest.approx(2.302585, abs=1e-6)


@given(ps, ks)
def test_velocity_solves_quadratic(p, k):
    v = optimal.pdot_optimal(p, k)
    resid = (2 - p + k) * v * v - k * (2 - 3 * p) * v - 2 * k * p * (1 - p)
    assert abs(resid) <= 1e-12 * max(1.0, k * k)
    assert v >= 0


@given(st.floats(0.001, 1.0), ks)
def test_branch1_root_is_negative(p, k):
    assert optimal.pdot_optimal(p, k, branch=1) <= 0


@given(ps, ks)
def test_conserved_quantity_identity(p, k):
    v = optimal.pdot_optimal(p, k)
    if v > 1e-12:
        assert optimal.conserved_quantity(p, v) == pytest.approx(k, rel=1e-9)


@given(ps, ks)
def test_energy_closed_form_consistency(p, k):
    a = optimal.energy_of_p(p, k)
    b = optimal.energy_closed_form(p, k)
    c = math.log((2 - p) / (p + optimal.pdot_optimal(p, k)) - 1)
    assert a == pytest.approx(b, abs=1e-8)
    assert a == pytest.approx(c, abs=1e-8)


def test_time_of_p_basics():
    assert optimal.time_of_p(0.0, 1.0) == 0.0
    assert optimal.time_of_p(0.6, 1.0) > optimal.time_of_p(0.3, 1.0)


@pytest.mark.parametrize("k", [0.1, 1.0, 10.0])
def test_invert_time_round_trip(k):
    t = optimal.time_of_p(0.4, k)
    assert optimal.invert_time(t, k) == pytest.approx(0.4, abs=1e-8)


@pytest.mark.parametrize("k", [0.1, 1.0])
def test_invert_time_round_trip_branch1(k):
    t = optimal.time_of_p(0.4, k, branch=1)
    assert optimal.invert_time(t, k, branch=1) == pytest.approx(0.4, abs=1e-8)


def test_invert_time_small_time():
    assert optimal.invert_time(0.0, 1.0) == 0.0
    dt = 1e-4
    assert optimal.invert_time(dt, 1.0) == pytest.approx(dt * 2 / 3, rel=1e-3)


def test_g_function_zero():
    assert optimal.g_function(0.0, 0.3) == 0.0
    assert optimal.work_for_k(0.0, 0.3) == 0.0


@pytest.mark.parametrize("gt, branch", sorted(KAPPA))
def test_kappa_frozen(gt, branch):
    assert optimal.optimize_kappa(gt, branch) == pytest.approx(KAPPA[(gt, branch)], rel=1e-4)


def test_kappa_is_a_maximizer():
    for b in (0, 1):
        k = optimal.optimize_kappa(1.0, b)
        w = optimal.work_for_k(1.0, k, b)
        for f in (0.5, 0.9, 1.1, 2.0):
            assert w >= optimal.work_for_k(1.0, k * f, b)


def test_kappa_dense_scan_agrees():
    grid = np.geomspace(0.05, 0.5, 201)
    w = [optimal.work_for_k(1.0, k) for k in grid]
    k_scan = grid[int(np.argmax(w))]
    assert abs(math.log(k_scan / optimal.optimize_kappa(1.0))) < 0.012


def test_kappa_monotone_slow_limit():
    ks_ = [optimal.optimize_kappa(gt) for gt in (0.1, 1.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(ks_, ks_[1:]))
    assert max(ks_) < 1.0


def test_work_bounded_by_landauer():
    for gt in (0.1, 1.0, 10.0, 100.0):
        for b in (0, 1):
            assert optimal.work_for_k(gt, optimal.optimize_kappa(gt, b), b) <= LN2


def test_dominance_and_monotonicity():
    prev = -1.0
    for gt in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0):
        w = optimal.work_for_k(gt, optimal.optimize_kappa(gt))
        assert w >= work_deterministic(optimal.naive_ramp(gt, 0))
        assert w >= prev
        prev = w


def test_predicted_work_matches_direct_definition(solutions_1):
    # the boundary term enters with -p(tau) ln 2; the direct work agrees with it
    for b, sol in enumerate(solutions_1):
        proto, _ = optimal.build_optimal_protocol(1.0, branch=b)
        direct = work_deterministic(proto)
        assert direct == pytest.approx(sol.predicted_work, rel=1e-5)


def test_solution_grid_shape(solutions_1):
    s0, s1 = solutions_1
    for s in solutions_1:
        assert s.t_grid[0] == 0.0 and s.t_grid[-1] == 1.0
        assert np.all(np.diff(s.t_grid) > 0)
    assert s0.p_grid[0] == 0.0 and np.all(np.diff(s0.p_grid) > 0)
    assert s1.p_grid[0] == 1.0 and np.all(np.diff(s1.p_grid) < 0)
    assert s0.eps_grid[0] > LN2
    assert s1.eps_grid[0] < LN2


def test_theory_occupation_matches_propagation(solutions_1):
    # driving the dynamics with the optimal energy reproduces the optimal p(t)
    for b, sol in enumerate(solutions_1):
        proto, _ = optimal.build_optimal_protocol(1.0, 2049, b)
        s = optimal.solve(1.0, b, 2049)
        _, p = propagate_protocol(float(b), proto, grid_points=20_000)
        assert p[-1] == pytest.approx(s.p_final, abs=1e-5)


def test_protocol_structure():
    proto, sol = optimal.build_optimal_protocol(1.0)
    first, ramp, last = proto.segments
    assert isinstance(first, Jump) and isinstance(ramp, Ramp) and isinstance(last, Jump)
    assert first.start == LN2 and last.end == LN2
    assert proto.gamma_tau == 1.0


def test_end_jump_shrinks_with_slow_driving():
    def end_jump(gt):
        proto, _ = optimal.build_optimal_protocol(gt)
        return abs(proto.segments[-1].start - LN2)
    assert end_jump(10.0) < end_jump(0.1)


def test_fast_protocol_is_bang_bang():
    proto, _ = optimal.build_optimal_protocol(0.1)
    ramp = proto.segments[1]
    mid = proto.value_at(0.05)
    height = ramp.start - LN2
    assert np.max(np.abs(ramp.values - mid)) < 0.25 * height


def test_naive_ramp_shape():
    proto = optimal.naive_ramp(2.0, 0)
    assert proto.value_at(0.0) == pytest.approx(LN2 + 5.0)
    assert proto.segments[-1].end == pytest.approx(LN2)
    t = np.array([0.2, 0.9, 1.7])
    vals = [proto.value_at(x) for x in t]
    assert np.allclose(np.diff(vals) / np.diff(t), -5.0 / 2.0)
    assert optimal.naive_ramp(1.0, 1).value_at(0.0) == pytest.approx(LN2 - 5.0)


def test_bad_branch():
    with pytest.raises(ValueError):
        optimal.work_for_k(1.0, 0.1, branch=3)


# --- brute-force oracle --------------------------------------------------

def test_adjoint_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    levels = LN2 + rng.uniform(-2, 4, 16)
    _, g = work_and_gradient(levels, 1.0, 0.0)
    h = 1e-6
    for i in (0, 5, 15):
        e = np.zeros_like(levels)
        e[i] = h
        fd = (work_and_gradient(levels + e, 1.0, 0.0)[0] - work_and_gradient(levels - e, 1.0, 0.0)[0]) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_bruteforce_work_matches_direct_definition():
    proto, w = brute_force_optimum(0.5, 16, 0, n_random=0)
    assert work_deterministic(proto, grid_points=2) == pytest.approx(w, rel=1e-10)


@pytest.mark.parametrize("branch", [0, 1])
def test_closed_form_vs_bruteforce(branch):
    closed = optimal.work_for_k(1.0, optimal.optimize_kappa(1.0, branch), branch)
    _, brute = brute_force_optimum(1.0, 64, branch)
    assert brute <= closed * (1 + 1e-6)
    assert abs(brute - closed) / closed < 5e-3


def test_bruteforce_refinement_helps():
    _, w8 = brute_force_optimum(1.0, 8)
    _, w64 = brute_force_optimum(1.0, 64)
    assert w64 >= w8


def test_bruteforce_fast_is_bang_bang():
    proto, _ = brute_force_optimum(0.1, 64)
    levels = np.array([seg.start for seg in proto.segments if isinstance(seg, Ramp)])
    height = levels[0] - LN2
    assert np.ptp(levels) < 0.25 * height


def test_bruteforce_validation():
    with pytest.raises(ValueError):
        brute_force_optimum(1.0, 4)
