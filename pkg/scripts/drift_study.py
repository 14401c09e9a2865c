"""Sensitivity of power and power fluctuations to a constant calibration offset."""

import argparse
import json
from pathlib import Path

from szilard import analysis


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/drift")
    ap.add_argument("--tau", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    ap.add_argument("--shift-endpoints", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = [r for gt in args.tau
               for r in analysis.drift_sensitivity(gt, endpoints=args.shift_endpoints)]
    for b in (0, 1):
        analysis.write_drift_csv([r for r in results if r.branch == b], out / f"drift_branch{b}.csv")
    (out / "drift_summary.json").write_text(json.dumps([r.as_dict() for r in results], indent=1))

    for r in results:
        print(f"gamma_tau={r.gamma_tau:<5g} branch {r.branch}: power exponent {r.fitted_exponents[0]:.3f}, "
              f"fluctuation exponent {r.fitted_exponents[1]:.3f}")
    probe = analysis.pareto_probe(1.0, 0.05)
    print(f"gamma_tau=1, shift {probe.shift:+.2f}: power {probe.rel_power_change:+.2e}, "
          f"fluctuations {probe.rel_fluct_change:+.2e}")


if __name__ == "__main__":
    main()
