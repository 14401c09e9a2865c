"""Thermodynamic functionals of protocols and work-sample estimators.

Work is extracted work in units of k_B T. For a stepped control with
energy increments ``d_k`` at times ``t_k`` a single realization yields
``W = -sum_k n(t_k) d_k`` and the mean is ``-sum_k p(t_k) d_k``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .engine import DEFAULT_GRID, DEFAULT_RATIO, LN2, Protocol, SteppedControl, discretize, propagate_control

# ln 2 is the free-energy drop -Delta F of one cycle in units of k_B T.
FREE_ENERGY_DROP = LN2


def _control(protocol, grid_points: int) -> SteppedControl:
    if isinstance(protocol, SteppedControl):
        return protocol
    return discretize(protocol, grid_points)


def initial_occupation(protocol) -> float:
    return float(getattr(protocol, "branch", 0))


def work_deterministic(protocol, p0: float | None = None, grid_points: int = DEFAULT_GRID,
                       ratio: float = DEFAULT_RATIO) -> float:
    """Mean extracted work, summed over every control increment including jumps."""
    control = _control(protocol, grid_points)
    if p0 is None:
        p0 = initial_occupation(protocol)
    p = propagate_control(p0, control, ratio)
    return float(-np.dot(p, control.increments))


def work_variance(protocol, p0: float | None = None, grid_points: int = DEFAULT_GRID,
                  ratio: float = DEFAULT_RATIO) -> float:
    """Exact variance of the extracted work.

    ``Var W = sum_k d_k^2 p_k (1 - p_k) + 2 sum_{j<k} d_j d_k p_j (q(t_k|t_j) - p_k)``
    where ``q(t_k|t_j) - p_k = (1 - p_j) exp(-(L_k - L_j))`` and ``L`` is the
    cumulative relaxation exponent. The double sum is accumulated by a
    forward recursion.
    """
    control = _control(protocol, grid_points)
    if p0 is None:
        p0 = initial_occupation(protocol)
    p = propagate_control(p0, control, ratio)
    d = control.increments
    decay = np.exp(-np.diff(control.decay_exponents(ratio)))
    var_n = p * (1.0 - p)
    diag = float(np.dot(d * d, var_n))
    cross = 0.0
    acc = 0.0  # sum_{j<k} d_j p_j (1 - p_j) exp(-(L_k - L_j))
    for k in range(d.size):
        if k:
            acc = (acc + d[k - 1] * var_n[k - 1]) * decay[k - 1]
        cross += d[k] * acc
    return max(diag + 2.0 * cross, 0.0)


def fluctuation_integral(protocol, p0: float | None = None, grid_points: int = DEFAULT_GRID,
                         ratio: float = DEFAULT_RATIO) -> float:
    """Power fluctuation ``Var(W) / gamma_tau`` from the double time integral."""
    control = _control(protocol, grid_points)
    if control.gamma_tau <= 0:
        raise ValueError("fluctuation_integral needs a protocol of positive duration")
    return work_variance(control, p0 if p0 is not None else initial_occupation(protocol),
                         ratio=ratio) / control.gamma_tau


def efficiency(work: float) -> float:
    return work / LN2


def power(work: float, gamma_tau: float) -> float:
    return work / gamma_tau


def fdr_residual(work: float, fluctuation: float, gamma_tau: float):
    """Relative violation of ``(gamma_tau/2) dP = -W - dF``.

    Returns ``(residual, relative)``; when the dissipated work is below
    1e-12 the absolute residual is returned with ``relative=False``.
    """
    dissipated = FREE_ENERGY_DROP - work
    lhs = 0.5 * gamma_tau * fluctuation
    if abs(dissipated) < 1e-12:
        return lhs - dissipated, False
    return (lhs - dissipated) / dissipated, True


@dataclass(frozen=True)
class EnginePerformance:
    gamma_tau: float
    work: float
    efficiency: float
    power: float
    fluctuation: float
    fdr_residual: float
    work_err: float = 0.0
    fluctuation_err: float = 0.0

    @classmethod
    def from_moments(cls, gamma_tau: float, work: float, variance: float,
                     work_err: float = 0.0, variance_err: float = 0.0) -> "EnginePerformance":
        fluct = variance / gamma_tau
        res, _ = fdr_residual(work, fluct, gamma_tau)
        return cls(gamma_tau, work, efficiency(work), power(work, gamma_tau), fluct, res,
                   work_err, variance_err / gamma_tau)

    def as_dict(self) -> dict:
        return asdict(self)


def branch_performance(protocol: Protocol, grid_points: int = DEFAULT_GRID,
                       ratio: float = DEFAULT_RATIO) -> EnginePerformance:
    control = discretize(protocol, grid_points)
    p0 = initial_occupation(protocol)
    w = work_deterministic(control, p0, ratio=ratio)
    v = work_variance(control, p0, ratio=ratio)
    return EnginePerformance.from_moments(control.gamma_tau, w, v)


def cycle_performance(perf0: EnginePerformance, perf1: EnginePerformance) -> EnginePerformance:
    """Combine branch results for a fair-coin measurement.

    The mean work is the plain average; the variance follows the law of
    total variance, so it matches the spread of full-cycle samples.
    """
    if not math.isclose(perf0.gamma_tau, perf1.gamma_tau, rel_tol=1e-9):
        raise ValueError("branches must share gamma_tau")
    gt = perf0.gamma_tau
    w = 0.5 * (perf0.work + perf1.work)
    v0, v1 = perf0.fluctuation * gt, perf1.fluctuation * gt
    var = 0.5 * (v0 + v1) + 0.25 * (perf0.work - perf1.work) ** 2
    return EnginePerformance.from_moments(gt, w, var)


# ---------------------------------------------------------------------------
# Estimators


def raw_moment(samples, j: int) -> float:
    samples = np.asarray(samples, dtype=float)
    return float(np.mean(samples ** j))


def mean_estimator(samples):
    """Sample mean and its standard error ``sqrt(V/N)``."""
    w = np.asarray(samples, dtype=float)
    if w.size < 2:
        raise ValueError("mean_estimator needs at least 2 samples")
    if np.ptp(w) == 0:
        return float(w[0]), 0.0
    v = float(np.var(w, ddof=1))
    return float(np.mean(w)), math.sqrt(v / w.size)


def variance_of_variance_central(samples) -> float:
    """Plug-in ``(mu4 - sigma^4 (N-3)/(N-1)) / N``."""
    w = np.asarray(samples, dtype=float)
    n = w.size
    c = w - w.mean()
    mu4 = float(np.mean(c ** 4))
    s2 = float(np.var(w, ddof=1))
    return (mu4 - s2 * s2 * (n - 3) / (n - 1)) / n


def variance_of_variance_raw(samples) -> float:
    """Raw-moment variance-of-variance expression used for the published error bars.

    Evaluated with the raw moment estimators m2, m3, m4 and the unbiased V.
    It is not translation invariant and disagrees with the central form,
    so it is reported alongside and never used as the error bar.
    """
    w = np.asarray(samples, dtype=float)
    n = w.size
    m1, m2, m3, m4 = (raw_moment(w, j) for j in (1, 2, 3, 4))
    v = float(np.var(w, ddof=1))
    return (m4 * (n * (n - 4) + 1) / (n * (n - 1) ** 2)
            - 4.0 * m3 * m1 / n - v * v / (n - 1) + 3.0 * m2 * m2 / n)


def variance_estimator(samples):
    """Unbiased variance and its standard error (central-moment form).

    The error bar needs N >= 5; for smaller samples it is NaN.
    """
    w = np.asarray(samples, dtype=float)
    if w.size < 2:
        raise ValueError("variance_estimator needs at least 2 samples")
    v = float(np.var(w, ddof=1))
    if w.size < 5:
        return v, float("nan")
    var_v = variance_of_variance_central(w)
    if var_v < 0:
        warnings.warn("negative variance-of-variance estimate clamped to 0", RuntimeWarning)
        var_v = 0.0
    return v, math.sqrt(var_v)


@dataclass(frozen=True)
class WorkStatistics:
    n_samples: int
    mean_work: float
    mean_work_err: float
    var_work: float
    var_work_err: float
    var_work_err_raw_formula: float
    raw_moments: tuple

    @classmethod
    def from_samples(cls, samples) -> "WorkStatistics":
        w = np.asarray(samples, dtype=float)
        mean, mean_err = mean_estimator(w)
        var, var_err = variance_estimator(w)
        raw = variance_of_variance_raw(w)
        return cls(int(w.size), mean, mean_err, var, var_err,
                   math.sqrt(raw) if raw >= 0 else float("nan"),
                   tuple(raw_moment(w, j) for j in (2, 3, 4)))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["raw_moments"] = dict(zip(("m2", "m3", "m4"), self.raw_moments))
        return d
