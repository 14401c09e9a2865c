"""Command-line entry point: ``szilard {protocol,sweep,simulate,drift,validate}``.

Files use reduced units (energies times beta, times times Gamma_out).
Exit codes: 0 success, 1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__, analysis, optimal, simulate, validation
from .engine import DEFAULT_GRID, PhysicalParams, Protocol, ProtocolError
from .stats import WorkStatistics, branch_performance, cycle_performance

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("szilard")


@dataclass
class RunConfig:
    temperature_mK: float = 180.0
    gamma_in_hz: float = 7.0
    gamma_out_hz: float = 3.5
    tau_list: list = field(default_factory=analysis.default_tau_grid)
    n_cycles: int = 10_000
    master_seed: int = 0
    grid_points: int = optimal.DEFAULT_SAMPLES
    quadrature_tol: float = optimal.QUAD_TOL
    drift_shifts: list = field(default_factory=analysis.default_shifts)
    output_dir: str = "."

    def validate(self) -> None:
        for name in ("temperature_mK", "gamma_in_hz", "gamma_out_hz", "quadrature_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.tau_list or any(not t > 0 for t in self.tau_list):
            raise ValueError("tau_list values must be positive")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if self.grid_points < 16:
            raise ValueError("grid_points must be >= 16")

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams.from_temperature(self.temperature_mK * 1e-3, self.gamma_in_hz,
                                               self.gamma_out_hz)

    def check_ratio(self) -> None:
        if abs(self.params.ratio - 2.0) > 1e-9:
            raise ValueError("optimal protocols require gamma_in = 2 * gamma_out")


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return data


def metadata(config: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "config": asdict(config),
            "versions": {"szilard": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            **extra}


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_protocol(config: RunConfig, args) -> int:
    config.check_ratio()
    out = Path(config.output_dir)
    proto, sol = optimal.build_optimal_protocol(args.gamma_tau, config.grid_points, args.branch,
                                                config.quadrature_tol)
    perf = branch_performance(proto)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"protocol_branch{args.branch}"
    doc = proto.to_json()
    doc["meta"] = metadata(config, "protocol", gamma_tau=args.gamma_tau, kappa_tau=sol.kappa_tau)
    _dump_json(doc, stem.with_suffix(".json"))
    params = config.params
    with open(stem.with_suffix(".csv"), "w") as fh:
        fh.write("t_reduced,beta_eps,p_theory" + (",t_seconds,eps_joule" if args.si else "") + "\n")
        for t, x, p in zip(sol.t_grid.tolist(), sol.eps_grid.tolist(), sol.p_grid.tolist()):
            line = f"{t!r},{x!r},{p!r}"
            if args.si:
                line += f",{params.time_to_si(t)!r},{params.energy_to_si(x)!r}"
            fh.write(line + "\n")
    report = {"gamma_tau": args.gamma_tau, "branch": args.branch, "kappa_tau": sol.kappa_tau,
              "work_reduced": perf.work, "efficiency": perf.efficiency,
              "power_reduced": perf.power, "delta_p_reduced": perf.fluctuation,
              "work_predicted": sol.predicted_work}
    if args.si:
        report.update(work_joule=params.energy_to_si(perf.work),
                      power_watt=params.power_to_si(perf.power))
    print(json.dumps(report))
    return 0


def cmd_sweep(config: RunConfig, args) -> int:
    config.check_ratio()
    rows = analysis.sweep(config.tau_list, args.montecarlo, config.n_cycles, config.master_seed,
                          config.grid_points, DEFAULT_GRID, config.quadrature_tol, args.threads)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = {which: analysis.write_sweep_csv(rows, out / f"sweep_{which}.csv", which)
              for which in ("optimal", "naive")}
    mc = {}
    for row in rows:
        if row.montecarlo_stats:
            mc[repr(row.gamma_tau)] = {k: s.as_dict() for k, s in row.montecarlo_stats.items()}
    meta = metadata(config, "sweep", montecarlo=args.montecarlo, rows=counts,
                    kappa={repr(r.gamma_tau): list(r.kappa) for r in rows},
                    failures={repr(r.gamma_tau): r.error for r in rows if not r.ok},
                    branch_weighting="cycle rows: fair-coin average of work; variance by law of total variance",
                    montecarlo_statistics=mc)
    _dump_json(meta, out / "sweep_meta.json")
    return 1 if any(not r.ok for r in rows) else 0


def cmd_simulate(config: RunConfig, args) -> int:
    try:
        protos = [Protocol.load(p) for p in args.protocol_file]
    except (OSError, ProtocolError) as exc:
        print(f"error: malformed protocol file: {exc}", file=sys.stderr)
        return 1
    if len(protos) == 2:
        protos.sort(key=lambda p: p.branch)
        results = simulate.run_batch(protos, config.n_cycles, config.master_seed,
                                     workers=args.threads)
    else:
        results = simulate.run_branch(protos[0], config.n_cycles, config.master_seed)
    stats = WorkStatistics.from_samples([r.work for r in results])
    theory = [branch_performance(p) for p in protos]
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    simulate.write_samples_csv(results, out / "samples.csv")
    if args.dump_jumps:
        simulate.write_jumps_jsonl(results, out / "jumps.jsonl")
    doc = stats.as_dict()
    th = cycle_performance(*theory) if len(theory) == 2 else theory[0]
    var_theory = th.fluctuation * th.gamma_tau
    doc["theory"] = {"work": th.work, "var_work": var_theory,
                     "z_mean": (stats.mean_work - th.work) / stats.mean_work_err,
                     "z_var": (stats.var_work - var_theory) / stats.var_work_err}
    doc["meta"] = metadata(config, "simulate", protocol_files=[Path(p).name for p in args.protocol_file])
    _dump_json(doc, out / "statistics.json")
    return 0


def cmd_drift(config: RunConfig, args) -> int:
    config.check_ratio()
    taus = args.tau if args.tau else [0.1, 1.0, 10.0]
    results = []
    for gt in taus:
        results.extend(analysis.drift_sensitivity(gt, config.drift_shifts,
                                                  samples=config.grid_points,
                                                  tol=config.quadrature_tol,
                                                  endpoints=args.shift_endpoints))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for b in (0, 1):
        analysis.write_drift_csv([r for r in results if r.branch == b], out / f"drift_branch{b}.csv")
    summary = metadata(config, "drift", shift_endpoints=args.shift_endpoints, exponents=[r.as_dict() for r in results])
    _dump_json(summary, out / "drift_summary.json")
    for r in results:
        print(json.dumps(r.as_dict()))
    return 0


def cmd_validate(config: RunConfig, args) -> int:
    checks = validation.run_all(quick=args.quick)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------------------


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with RunConfig keys")
    common.add_argument("--output-dir")
    common.add_argument("--temperature-mk", type=_positive, dest="temperature_mK")
    common.add_argument("--gamma-in", type=_positive, dest="gamma_in_hz")
    common.add_argument("--gamma-out", type=_positive, dest="gamma_out_hz")
    common.add_argument("--seed", type=int, dest="master_seed")
    common.add_argument("--n-cycles", type=int, dest="n_cycles")
    common.add_argument("--samples", type=int, dest="grid_points",
                        help="ramp samples per optimal protocol")
    common.add_argument("--quad-tol", type=_positive, dest="quadrature_tol")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--si", action="store_true", help="add SI columns where supported")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="szilard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protocol", parents=[common], help="optimal protocol for one branch")
    p.add_argument("--gamma-tau", type=_positive, required=True)
    p.add_argument("--branch", type=int, choices=(0, 1), default=0)

    p = sub.add_parser("sweep", parents=[common], help="optimal vs naive over driving speeds")
    p.add_argument("--tau-list", type=_floats, dest="tau_list")
    p.add_argument("--montecarlo", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo cycles from protocol files")
    p.add_argument("protocol_file", nargs="+")
    p.add_argument("--dump-jumps", action="store_true")

    p = sub.add_parser("drift", parents=[common], help="calibration-offset sensitivity")
    p.add_argument("--tau", type=_floats)
    p.add_argument("--shifts", type=_floats, dest="drift_shifts")
    p.add_argument("--shift-endpoints", action="store_true",
                   help="move the boundary levels too (first-order work change)")

    p = sub.add_parser("validate", parents=[common], help="run the oracle suite")
    p.add_argument("--quick", action="store_true")
    return parser


COMMANDS = {"protocol": cmd_protocol, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "drift": cmd_drift, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    values = {}
    try:
        if args.config:
            values.update(load_config(args.config))
    except (OSError, ValueError) as exc:
        parser.error(f"bad config file: {exc}")
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    config = RunConfig(**values)
    if args.command == "simulate" and len(args.protocol_file) > 2:
        parser.error("simulate takes one or two protocol files")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        config.validate()
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return COMMANDS[args.command](config, args)
    except (RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
