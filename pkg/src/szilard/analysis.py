"""Driving-speed sweeps and calibration-drift sensitivity."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import optimal
from .engine import DEFAULT_GRID
from .simulate import run_batch
from .stats import (EnginePerformance, WorkStatistics, branch_performance, cycle_performance)

log = logging.getLogger(__name__)

BRANCHES = ("0", "1", "cycle")
PERFORMANCE_HEADER = ["gamma_tau", "branch", "work_reduced", "efficiency", "power_reduced",
                      "delta_p_reduced", "fdr_residual", "source"]
DRIFT_HEADER = ["gamma_tau", "beta_delta", "rel_power_change", "rel_fluct_change"]
FIT_WINDOW = (0.01, 0.1)


def default_tau_grid(n: int = 16) -> list[float]:
    return np.geomspace(0.1, 10.0, n).tolist()


def default_shifts(n: int = 7) -> list[float]:
    mags = np.geomspace(*FIT_WINDOW, n)
    return sorted([0.0, *mags.tolist(), *(-mags).tolist()])


@dataclass
class SweepRow:
    gamma_tau: float
    optimal: dict  # branch label -> EnginePerformance
    naive: dict
    kappa: tuple = (np.nan, np.nan)
    montecarlo: dict | None = None
    montecarlo_stats: dict | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _mc_performance(results, gamma_tau: float):
    out, stats = {}, {}
    works = np.array([r.work for r in results])
    bits = np.array([r.measured_bit for r in results])
    for label, mask in (("0", bits == 0), ("1", bits == 1), ("cycle", np.ones_like(bits, bool))):
        if mask.sum() < 5:
            continue
        s = WorkStatistics.from_samples(works[mask])
        stats[label] = s
        out[label] = EnginePerformance.from_moments(gamma_tau, s.mean_work, s.var_work,
                                                    s.mean_work_err, s.var_work_err)
    return out, stats


def point_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def evaluate_point(gamma_tau: float, index: int = 0, with_montecarlo: bool = False,
                   n_cycles: int = 0, master_seed: int = 0,
                   samples: int = optimal.DEFAULT_SAMPLES, grid_points: int = DEFAULT_GRID,
                   tol: float = optimal.QUAD_TOL) -> SweepRow:
    """Theory (and optional Monte Carlo) performance at one driving speed."""
    try:
        protos, kappas = [], []
        for b in (0, 1):
            proto, sol = optimal.build_optimal_protocol(gamma_tau, samples, b, tol)
            protos.append(proto)
            kappas.append(sol.kappa_tau)
        naive = [optimal.naive_ramp(gamma_tau, b) for b in (0, 1)]
        opt_perf = [branch_performance(p, grid_points) for p in protos]
        naive_perf = [branch_performance(p, grid_points) for p in naive]
    except (RuntimeError, ValueError) as exc:
        log.error("sweep point gamma_tau=%g failed: %s", gamma_tau, exc)
        return SweepRow(gamma_tau, {}, {}, error=str(exc))
    row = SweepRow(
        gamma_tau,
        dict(zip(BRANCHES, [*opt_perf, cycle_performance(*opt_perf)])),
        dict(zip(BRANCHES, [*naive_perf, cycle_performance(*naive_perf)])),
        tuple(kappas))
    if with_montecarlo:
        results = run_batch(protos, n_cycles, point_seed(master_seed, index), grid_points)
        row.montecarlo, row.montecarlo_stats = _mc_performance(results, gamma_tau)
    return row


def sweep(gamma_tau_list, with_montecarlo: bool = False, n_cycles: int = 0,
          master_seed: int = 0, samples: int = optimal.DEFAULT_SAMPLES,
          grid_points: int = DEFAULT_GRID, tol: float = optimal.QUAD_TOL,
          workers: int = 1) -> list[SweepRow]:
    taus = [float(t) for t in gamma_tau_list]
    if not taus or any(not t > 0 for t in taus):
        raise ValueError("gamma_tau_list must be non-empty with positive values")
    if with_montecarlo and n_cycles < 1:
        raise ValueError("n_cycles must be >= 1 for Monte Carlo")
    # seeds follow the caller's ordering; rows come back sorted by gamma_tau
    args = [(t, i, with_montecarlo, n_cycles, master_seed, samples, grid_points, tol)
            for i, t in enumerate(taus)]
    if workers <= 1:
        rows = [evaluate_point(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate_point, *zip(*args)))
    return sorted(rows, key=lambda r: r.gamma_tau)


def _perf_line(gamma_tau, label, perf: EnginePerformance, source):
    vals = (gamma_tau, perf.work, perf.efficiency, perf.power, perf.fluctuation, perf.fdr_residual)
    g, *rest = (repr(float(v)) for v in vals)
    return [g, label, *rest, source]


def write_sweep_csv(rows, path, which: str = "optimal") -> int:
    """Performance table for the optimal or naive protocols; returns row count."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERFORMANCE_HEADER)
        for row in rows:
            if not row.ok:
                continue
            for label in BRANCHES:
                w.writerow(_perf_line(row.gamma_tau, label, getattr(row, which)[label], "theory"))
                n += 1
            if which == "optimal" and row.montecarlo:
                for label in BRANCHES:
                    if label in row.montecarlo:
                        w.writerow(_perf_line(row.gamma_tau, label, row.montecarlo[label], "montecarlo"))
                        n += 1
    return n


# ---------------------------------------------------------------------------
# Calibration drift


@dataclass
class DriftResult:
    gamma_tau: float
    branch: int
    shift_values: list
    rel_power_change: list
    rel_fluct_change: list
    fitted_exponents: tuple = field(default=(np.nan, np.nan))

    def as_dict(self) -> dict:
        return {"gamma_tau": self.gamma_tau, "branch": self.branch,
                "power_exponent": self.fitted_exponents[0],
                "fluct_exponent": self.fitted_exponents[1]}


def fit_exponent(shifts, changes, window=FIT_WINDOW) -> float:
    """Least-squares slope of log|change| against log|shift| inside ``window``."""
    s = np.abs(np.asarray(shifts, dtype=float))
    c = np.abs(np.asarray(changes, dtype=float))
    mask = (s >= window[0] * (1 - 1e-12)) & (s <= window[1] * (1 + 1e-12)) & (c > 0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(s[mask]), np.log(c[mask]), 1)[0])


def _relative_changes(protocol, shifts, grid_points, endpoints=False):
    base = branch_performance(protocol, grid_points)
    dpow, dfl = [], []
    for d in shifts:
        perf = branch_performance(protocol.shifted(d, endpoints), grid_points) if d else base
        dpow.append(perf.power / base.power - 1.0)
        dfl.append(perf.fluctuation / base.fluctuation - 1.0)
    return dpow, dfl


def drift_sensitivity(gamma_tau: float, shift_list=None, branches=(0, 1),
                      samples: int = optimal.DEFAULT_SAMPLES, grid_points: int = DEFAULT_GRID,
                      tol: float = optimal.QUAD_TOL, endpoints: bool = False) -> list[DriftResult]:
    """Relative power and fluctuation change under a constant energy offset.

    By default the offset moves the whole driven part of the optimal
    protocol and the boundary jumps absorb it, so the cycle still starts
    and ends at ln 2. ``endpoints=True`` also moves the end levels; the
    work then picks up a first-order term from the boundary mismatch.
    """
    shifts = default_shifts() if shift_list is None else [float(s) for s in shift_list]
    out = []
    for b in branches:
        proto, _ = optimal.build_optimal_protocol(gamma_tau, samples, b, tol)
        dpow, dfl = _relative_changes(proto, shifts, grid_points, endpoints)
        exps = (fit_exponent(shifts, dpow), fit_exponent(shifts, dfl))
        out.append(DriftResult(gamma_tau, b, shifts, dpow, dfl, exps))
    return out


def write_drift_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DRIFT_HEADER)
        for res in results:
            for d, p, f in zip(res.shift_values, res.rel_power_change, res.rel_fluct_change):
                w.writerow([repr(float(v)) for v in (res.gamma_tau, d, p, f)])


class ParetoProbe(NamedTuple):
    shift: float
    rel_power_change: float
    rel_fluct_change: float


def pareto_probe(gamma_tau: float, shift: float, branch: int = 0,
                 samples: int = optimal.DEFAULT_SAMPLES,
                 grid_points: int = DEFAULT_GRID) -> ParetoProbe:
    """Power/fluctuation trade for an offset of size ``|shift|``, signed to lower fluctuations."""
    if shift == 0:
        return ParetoProbe(0.0, 0.0, 0.0)
    proto, _ = optimal.build_optimal_protocol(gamma_tau, samples, branch)
    mag = abs(shift)
    dpow, dfl = _relative_changes(proto, [mag, -mag], grid_points)
    i = int(np.argmin(dfl))
    return ParetoProbe((mag, -mag)[i], dpow[i], dfl[i])
