"""Direct numerical optimization of piecewise-constant protocols.

Independent check on the Euler-Lagrange solution: the energy is held at
``n_steps`` free levels on a uniform time grid and the extracted work

    W = sum_k L_k (p_{k+1} - p_k) + ln2 (p_0 - p_M)

is maximized with L-BFGS-B from several starting protocols. The gradient
comes from a backward (adjoint) sweep through the exact step propagator.
Nothing from the closed-form solution is used.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import optimize

from .engine import DEFAULT_RATIO, LN2, Protocol, fermi, piecewise_constant_protocol

log = logging.getLogger(__name__)

LEVEL_BOUNDS = (-40.0, 40.0)


def _forward(levels, dt, p0, ratio):
    f = fermi(levels)
    rate = 1.0 + (ratio - 1.0) * f
    eq = ratio * f / rate
    a = np.exp(-rate * dt)
    p = np.empty(levels.size + 1)
    p[0] = p0
    for k in range(levels.size):
        p[k + 1] = eq[k] + (p[k] - eq[k]) * a[k]
    return p, f, rate, eq, a


def work_and_gradient(levels, gamma_tau: float, p0: float, ratio: float = DEFAULT_RATIO):
    levels = np.asarray(levels, dtype=float)
    m = levels.size
    dt = gamma_tau / m
    p, f, rate, eq, a = _forward(levels, dt, p0, ratio)
    work = float(np.dot(levels, np.diff(p)) + LN2 * (p[0] - p[-1]))

    # lam[k] = dW/dp_k through everything downstream of p_k
    lam = np.empty(m + 1)
    lam[m] = levels[m - 1] - LN2
    for k in range(m - 1, 0, -1):
        lam[k] = levels[k - 1] - levels[k] + lam[k + 1] * a[k]
    df = -f * (1.0 - f)
    d_eq = ratio * df / rate ** 2
    d_a = -a * dt * (ratio - 1.0) * df
    dp_next = d_eq * (1.0 - a) + (p[:-1] - eq) * d_a
    grad = np.diff(p) + lam[1:] * dp_next
    return work, grad


def _starts(m: int, branch: int, n_random: int, rng: np.random.Generator):
    s = 1.0 if branch == 0 else -1.0
    u = (np.arange(m) + 0.5) / m
    starts = [
        LN2 + s * 5.0 * (1.0 - u),          # naive linear ramp
        LN2 + s * (6.0 - 5.0 * u),
        np.full(m, LN2 + s * 2.0),
        np.full(m, LN2 + s * 4.0),
    ]
    for _ in range(n_random):
        starts.append(LN2 + s * rng.uniform(0.0, 8.0) * (1.0 - u) ** rng.uniform(0.2, 3.0))
    return starts


def brute_force_optimum(gamma_tau: float, n_steps: int = 64, branch: int = 0,
                        n_random: int = 4, seed: int = 0, ratio: float = DEFAULT_RATIO,
                        ) -> tuple[Protocol, float]:
    """Best piecewise-constant protocol found and its work (a lower bound on the optimum)."""
    if not 8 <= n_steps <= 256:
        raise ValueError("n_steps must be in [8, 256]")
    if not gamma_tau > 0:
        raise ValueError("gamma_tau must be positive")
    p0 = float(branch)
    rng = np.random.default_rng(seed)
    best_x, best_w = None, -np.inf
    for x0 in _starts(n_steps, branch, n_random, rng):
        res = optimize.minimize(
            lambda x: tuple(-v for v in work_and_gradient(x, gamma_tau, p0, ratio)),
            x0, jac=True, method="L-BFGS-B", bounds=[LEVEL_BOUNDS] * n_steps,
            options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-10})
        if not res.success:
            log.warning("brute force restart did not converge: %s", res.message)
        if -res.fun > best_w:
            best_x, best_w = res.x, -res.fun
    proto = piecewise_constant_protocol(best_x, gamma_tau / n_steps, branch)
    return proto, float(best_w)
