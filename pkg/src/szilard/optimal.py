"""Work-optimal finite-time protocols from the Euler-Lagrange first integral.

For ``ratio = 2`` the occupation equation lets the energy be written as a
function of ``p`` and ``pdot``; the work-extracting Lagrangian
``pdot * log((2 - p)/(p + pdot) - 1)`` has no explicit time dependence, so

    K = pdot^2 (2 - p) / ((p + pdot) (2 - 2p - pdot))

is conserved along the optimum. Solving this quadratic for ``pdot`` gives
the optimal velocity field, the time map ``F_K(P) = int dp / pdot`` and the
work integral ``G_K(P) = int beta*eps(p) dp``. The extracted work is

    branch 0 (p: 0 -> P):  G_K(P) - P ln 2
    branch 1 (p: 1 -> P):  (1 - P) ln 2 - int_P^1 beta*eps(p) dp

and the constant ``K`` is chosen to maximize it for the given duration.
Branch 1 uses the negative root of the same quadratic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .engine import LN2, Jump, Protocol, Ramp

QUAD_TOL = 1e-10
LOG10_K_RANGE = (-6.0, 3.0)
LOG10_K_STEP = 0.25
KAPPA_RTOL = 1e-6
DEFAULT_SAMPLES = 256

# Closest approach to the absorbing end of each branch (p -> 1 or p -> 0).
_P_EDGE = 1e-12


class QuadratureError(RuntimeError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


class BracketError(RuntimeError):
    """Raised when the work maximum in K cannot be bracketed."""

    def __init__(self, message: str, log10_k: np.ndarray, work: np.ndarray):
        super().__init__(message)
        self.log10_k = log10_k
        self.work = work


def _check_branch(branch: int) -> None:
    if branch not in (0, 1):
        raise ValueError(f"branch must be 0 or 1, got {branch!r}")


def discriminant(p, k):
    return k * k * (2.0 - p) ** 2 + 8.0 * k * p * (1.0 - p) * (2.0 - p)


def _roots(p, z, k, branch):
    # z = 1 - p, passed separately so it keeps full precision near p = 1
    a = 1.0 + z + k
    b = -k * (2.0 - 3.0 * p)
    c = -2.0 * k * p * z
    sq = np.sqrt(k * k * (1.0 + z) ** 2 + 8.0 * k * p * z * (1.0 + z))
    q = -0.5 * (b + np.where(b >= 0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = np.where(q != 0, c / q, 0.0)
    return np.maximum(r1, r2) if branch == 0 else np.minimum(r1, r2)


def _energy(p, z, k, branch):
    v = _roots(p, z, k, branch)
    with np.errstate(divide="ignore"):
        return np.log((2.0 * z - v) / (p + v))


def pdot_optimal(p, k, branch: int = 0):
    """Optimal occupation velocity at occupation ``p``.

    Roots of ``(2-p+K) v^2 - K(2-3p) v - 2Kp(1-p) = 0``, evaluated without
    cancellation; branch 0 takes the positive root, branch 1 the negative.
    """
    p = np.asarray(p, dtype=float)
    out = _roots(p, 1.0 - p, k, branch)
    return out if out.ndim else float(out)


def energy_of_p(p, k, branch: int = 0):
    """Optimal reduced energy as a function of the occupation along the optimum."""
    p = np.asarray(p, dtype=float)
    out = _energy(p, 1.0 - p, k, branch)
    return out if out.ndim else float(out)


def energy_closed_form(p, k):
    """Branch-0 optimal energy written directly in terms of ``p`` and ``K``."""
    p = np.asarray(p, dtype=float)
    num = 2.0 * (2.0 - p) * (2.0 - p + k)
    den = (2.0 - p) * (k + 2.0 * p) + np.sqrt(discriminant(p, k))
    out = np.log(num / den - 1.0)
    return out if out.ndim else float(out)


def conserved_quantity(p, pdot):
    p = np.asarray(p, dtype=float)
    return pdot ** 2 * (2.0 - p) / ((p + pdot) * (2.0 - 2.0 * p - pdot))


def time_integrand(p, k, branch: int = 0):
    """``dt/dp`` along the optimum (always positive)."""
    return 1.0 / np.abs(pdot_optimal(p, k, branch))


def _quad(fun, a, b, tol, what):
    if a == b:
        return 0.0
    val, err = integrate.quad(fun, a, b, epsabs=tol, epsrel=1e-11, limit=400,
                              full_output=True)[:2]
    if err > max(100 * tol, 1e-9 * abs(val)):
        raise QuadratureError(f"{what}: quadrature did not converge", err)
    return val


def _p_start(branch: int) -> float:
    return 0.0 if branch == 0 else 1.0


# Integrals run over u = -log(z), with z the distance of p from the end the
# trajectory relaxes towards (p = 1 - z on branch 0, p = z on branch 1).
# This removes the logarithmic divergence of the time map at that end.


def _u_of_p(p: float, branch: int) -> float:
    return -math.log1p(-p) if branch == 0 else -math.log(p)


def _p_of_u(u, branch: int):
    return -np.expm1(-u) if branch == 0 else np.exp(-u)


def _pz_of_u(u, branch: int):
    near, far = np.exp(-u), -np.expm1(-u)
    return (far, near) if branch == 0 else (near, far)


def _dt_du(u, k, branch):
    p, z = _pz_of_u(u, branch)
    return np.exp(-u) / np.abs(_roots(p, z, k, branch))


def _time_between(u_a: float, u_b: float, k: float, branch: int, tol: float) -> float:
    return _quad(lambda u: _dt_du(u, k, branch), u_a, u_b, tol, "time map")


def time_of_p(p_target: float, k: float, branch: int = 0, tol: float = QUAD_TOL) -> float:
    """Reduced time at which the optimal trajectory reaches ``p_target``."""
    _check_branch(branch)
    if not k > 0:
        raise ValueError("K must be positive")
    if branch == 0 and not 0.0 <= p_target < 1.0:
        raise ValueError("branch 0 needs p_target in [0, 1)")
    if branch == 1 and not 0.0 < p_target <= 1.0:
        raise ValueError("branch 1 needs p_target in (0, 1]")
    return _time_between(0.0, _u_of_p(p_target, branch), k, branch, tol)


def invert_time(gamma_tau: float, k: float, branch: int = 0, tol: float = QUAD_TOL,
                full_output: bool = False):
    """Occupation reached by the optimal trajectory after ``gamma_tau``.

    Safeguarded Newton iteration on ``F_K - gamma_tau`` with the exact
    derivative of the time map, bisection as fallback. Durations beyond the
    time needed to come within 1e-12 of the relaxation end return that edge,
    flagged ``saturated`` when ``full_output`` is set.
    """
    _check_branch(branch)
    if gamma_tau < 0:
        raise ValueError("gamma_tau must be non-negative")
    if not k > 0:
        raise ValueError("K must be positive")
    if gamma_tau == 0:
        p0 = _p_start(branch)
        return (p0, False) if full_output else p0

    u_max = -math.log(_P_EDGE)
    t_max = _time_between(0.0, u_max, k, branch, tol)
    if t_max <= gamma_tau:
        edge = float(_p_of_u(u_max, branch))
        return (edge, True) if full_output else edge

    lo, hi = 0.0, u_max
    # first-order start from the initial velocity
    u = min(gamma_tau / float(_dt_du(0.0, k, branch)), 0.5 * u_max)
    t_cur = _time_between(0.0, u, k, branch, tol)
    for _ in range(200):
        f = t_cur - gamma_tau
        if abs(f) < tol or hi - lo < 1e-15:
            break
        if f < 0:
            lo = u
        else:
            hi = u
        u_new = u - f / float(_dt_du(u, k, branch))
        if not lo < u_new < hi:
            u_new = 0.5 * (lo + hi)
        t_cur += _time_between(u, u_new, k, branch, tol) if u_new >= u \
            else -_time_between(u_new, u, k, branch, tol)
        u = u_new
    p = float(_p_of_u(u, branch))
    return (p, False) if full_output else p


def g_function(p_target: float, k: float, branch: int = 0, tol: float = QUAD_TOL) -> float:
    """Integral of the optimal energy over occupation from the branch start to ``p_target``.

    Signed as ``int_{p_start}^{p_target} beta*eps(p) dp``, so on both
    branches it equals ``int pdot * beta*eps dt``.
    """
    _check_branch(branch)
    u_t = _u_of_p(p_target, branch)

    def integrand(u):
        p, z = _pz_of_u(u, branch)
        return _energy(p, z, k, branch) * np.exp(-u)

    val = _quad(integrand, 0.0, u_t, tol, "g_function")
    return val if branch == 0 else -val


def work_from_endpoint(p_end: float, k: float, branch: int = 0, tol: float = QUAD_TOL) -> float:
    p0 = _p_start(branch)
    return (p0 - p_end) * LN2 + g_function(p_end, k, branch, tol)


def work_for_k(gamma_tau: float, k: float, branch: int = 0, tol: float = QUAD_TOL) -> float:
    """Reduced work extracted by the Euler-Lagrange trajectory with constant ``k``."""
    if gamma_tau == 0:
        return 0.0
    p_end = invert_time(gamma_tau, k, branch, tol)
    return work_from_endpoint(p_end, k, branch, tol)


def scan_kappa(gamma_tau: float, branch: int = 0, tol: float = QUAD_TOL,
               log10_range=LOG10_K_RANGE, step: float = LOG10_K_STEP):
    grid = np.arange(log10_range[0], log10_range[1] + 0.5 * step, step)
    work = np.array([work_for_k(gamma_tau, 10.0 ** g, branch, tol) for g in grid])
    return grid, work


def optimize_kappa(gamma_tau: float, branch: int = 0, tol: float = QUAD_TOL,
                   rtol: float = KAPPA_RTOL) -> float:
    """Euler-Lagrange constant maximizing extracted work at duration ``gamma_tau``."""
    _check_branch(branch)
    if not gamma_tau > 0:
        raise ValueError("gamma_tau must be positive")
    grid, work = scan_kappa(gamma_tau, branch, tol)
    i = int(np.argmax(work))
    if i == 0 or i == grid.size - 1:
        raise BracketError(
            f"work maximum at the edge of the K scan (log10 K = {grid[i]}) for gamma_tau={gamma_tau}",
            grid, work)
    res = optimize.minimize_scalar(
        lambda g: -work_for_k(gamma_tau, 10.0 ** g, branch, tol),
        bounds=(grid[i - 1], grid[i + 1]), method="bounded",
        options={"xatol": rtol / math.log(10.0)})
    if -res.fun < work[i]:
        return float(10.0 ** grid[i])
    return float(10.0 ** res.x)


@dataclass(frozen=True)
class OptimalSolution:
    kappa_tau: float
    gamma_tau: float
    branch: int
    p_grid: np.ndarray
    t_grid: np.ndarray
    eps_grid: np.ndarray
    predicted_work: float

    @property
    def p_final(self) -> float:
        return float(self.p_grid[-1])

    @property
    def pdot_grid(self) -> np.ndarray:
        return pdot_optimal(self.p_grid, self.kappa_tau, self.branch)


def solve(gamma_tau: float, branch: int = 0, grid_points: int = DEFAULT_SAMPLES,
          tol: float = QUAD_TOL, kappa: float | None = None) -> OptimalSolution:
    """Optimal trajectory sampled uniformly in occupation."""
    if grid_points < 16:
        raise ValueError("grid_points must be >= 16")
    k = optimize_kappa(gamma_tau, branch, tol) if kappa is None else kappa
    p_end = invert_time(gamma_tau, k, branch, tol)
    p0 = _p_start(branch)
    p_grid = np.linspace(p0, p_end, grid_points)
    u_grid = [_u_of_p(p, branch) for p in p_grid]
    pieces = [_time_between(a, b, k, branch, tol) for a, b in zip(u_grid[:-1], u_grid[1:])]
    t_grid = np.concatenate(([0.0], np.cumsum(pieces)))
    # pin the end to the requested duration; the mismatch is below tol
    t_grid *= gamma_tau / t_grid[-1]
    t_grid[-1] = gamma_tau
    eps_grid = energy_of_p(p_grid, k, branch)
    work = work_from_endpoint(p_end, k, branch, tol)
    return OptimalSolution(k, gamma_tau, branch, p_grid, t_grid, eps_grid, work)


def build_optimal_protocol(gamma_tau: float, grid_points: int = DEFAULT_SAMPLES, branch: int = 0,
                           tol: float = QUAD_TOL, kappa: float | None = None):
    """Optimal protocol (jump, sampled ramp, jump) and its solution record."""
    sol = solve(gamma_tau, branch, grid_points, tol, kappa)
    segs = [Jump(LN2, float(sol.eps_grid[0])),
            Ramp(sol.t_grid, sol.eps_grid),
            Jump(float(sol.eps_grid[-1]), LN2)]
    return Protocol(branch, segs), sol


def naive_ramp(gamma_tau: float, branch: int = 0, height: float = 5.0) -> Protocol:
    """Linear ramp back to ln 2 after a jump of ``height`` (down for branch 1)."""
    _check_branch(branch)
    if not gamma_tau > 0:
        raise ValueError("gamma_tau must be positive")
    top = LN2 + (height if branch == 0 else -height)
    return Protocol(branch, [Jump(LN2, top), Ramp.linear(gamma_tau, top, LN2)])
