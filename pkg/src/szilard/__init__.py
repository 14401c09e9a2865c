"""Optimal finite-time driving of a single-electron Szilard engine."""

__version__ = "0.1.0"

from .engine import (LN2, LeverArm, PhysicalParams, Protocol, ProtocolError, Jump, Ramp,
                     SteppedControl, discretize, fermi, propagate_constant, propagate_protocol)
from .optimal import build_optimal_protocol, invert_time, naive_ramp, optimize_kappa, work_for_k
from .stats import EnginePerformance, WorkStatistics, branch_performance, cycle_performance

__all__ = [
    "LN2", "LeverArm", "PhysicalParams", "Protocol", "ProtocolError", "Jump", "Ramp",
    "SteppedControl", "discretize", "fermi", "propagate_constant", "propagate_protocol",
    "build_optimal_protocol", "invert_time", "naive_ramp", "optimize_kappa", "work_for_k",
    "EnginePerformance", "WorkStatistics", "branch_performance", "cycle_performance",
]
