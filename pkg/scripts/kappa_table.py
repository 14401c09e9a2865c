"""Optimal Euler-Lagrange constant and efficiency per branch over driving speeds."""

import sys

from szilard import optimal
from szilard.engine import LN2

taus = [float(x) for x in sys.argv[1:]] or [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
print(f"{'gamma_tau':>9} {'kappa_0':>11} {'eta_0':>7} {'kappa_1':>11} {'eta_1':>7}")
for gt in taus:
    cells = []
    for b in (0, 1):
        k = optimal.optimize_kappa(gt, b)
        cells += [f"{k:11.4e}", f"{optimal.work_for_k(gt, k, b) / LN2:7.4f}"]
    print(f"{gt:9.3g} " + " ".join(cells))
