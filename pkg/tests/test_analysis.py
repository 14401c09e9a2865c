import csv

import numpy as np
import pytest

from szilard import analysis, optimal
from szilard.stats import branch_performance


@pytest.fixture(scope="module")
def rows():
    return analysis.sweep(analysis.default_tau_grid(8))


def test_default_grids():
    g = analysis.default_tau_grid()
    assert len(g) == 16 and g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(10.0)
    assert np.allclose(np.diff(np.log(g)), np.log(100) / 15)
    s = analysis.default_shifts()
    assert 0.0 in s and sorted(s) == s and s == [-x for x in reversed(s)]


def test_sweep_sorted_and_complete(rows):
    assert all(r.ok for r in rows)
    assert [r.gamma_tau for r in rows] == sorted(r.gamma_tau for r in rows)


def test_sweep_trends(rows):
    eta = [r.optimal["cycle"].efficiency for r in rows]
    pw = [r.optimal["cycle"].power for r in rows]
    assert all(a < b for a, b in zip(eta, eta[1:]))
    assert all(a > b for a, b in zip(pw, pw[1:]))
    assert rows[-1].optimal["cycle"].fluctuation < rows[0].optimal["cycle"].fluctuation


def test_dominance(rows):
    for r in rows:
        for label in analysis.BRANCHES:
            assert r.optimal[label].work >= r.naive[label].work


def test_fast_efficiency_ratio(rows):
    r = rows[0]
    assert r.gamma_tau == pytest.approx(0.1)
    for label in ("0", "cycle"):
        ratio = r.optimal[label].efficiency / r.naive[label].efficiency
        assert 1.5 <= ratio <= 2.1


def test_sweep_input_validation():
    with pytest.raises(ValueError):
        analysis.sweep([])
    with pytest.raises(ValueError):
        analysis.sweep([1.0, -2.0])
    with pytest.raises(ValueError):
        analysis.sweep([1.0], with_montecarlo=True, n_cycles=0)


def test_failed_point_is_annotated(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("no bracket")
    monkeypatch.setattr(optimal, "build_optimal_protocol", boom)
    (row,) = analysis.sweep([1.0])
    assert not row.ok and "no bracket" in row.error


def test_sweep_csv(tmp_path, rows):
    path = tmp_path / "s.csv"
    n = analysis.write_sweep_csv(rows, path, "optimal")
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == analysis.PERFORMANCE_HEADER
    assert n == len(data) - 1 == 3 * len(rows)


def test_sweep_montecarlo_columns(tmp_path):
    (row,) = analysis.sweep([1.0], with_montecarlo=True, n_cycles=4000, master_seed=3)
    theory, mc = row.optimal["cycle"], row.montecarlo["cycle"]
    assert abs(mc.work - theory.work) < 3 * mc.work_err
    n = analysis.write_sweep_csv([row], tmp_path / "s.csv")
    assert n == 6


# --- drift ---------------------------------------------------------------

@pytest.fixture(scope="module")
def drift_1():
    return analysis.drift_sensitivity(1.0)


def test_zero_shift_is_zero(drift_1):
    for res in drift_1:
        i = res.shift_values.index(0.0)
        assert res.rel_power_change[i] == 0.0 and res.rel_fluct_change[i] == 0.0


def test_drift_exponents(drift_1):
    for res in drift_1:
        p, f = res.fitted_exponents
        assert abs(p - 2) < 0.2 and abs(f - 1) < 0.2
        assert set(res.as_dict()) >= {"power_exponent", "fluct_exponent"}


def test_endpoint_shift_gives_linear_power_change():
    (res,) = analysis.drift_sensitivity(1.0, branches=(0,), endpoints=True)
    assert abs(res.fitted_exponents[0] - 1) < 0.2


def test_power_is_stationary_fluctuation_is_not():
    for b in (0, 1):
        proto, _ = optimal.build_optimal_protocol(1.0, branch=b)
        lo, hi = (branch_performance(proto.shifted(d)) for d in (-0.01, 0.01))
        dp = (hi.power - lo.power) / 0.02
        df = (hi.fluctuation - lo.fluctuation) / 0.02
        assert 3 * abs(dp) < abs(df)


def test_fit_exponent_recovers_power_law():
    s = np.geomspace(0.01, 0.1, 9)
    assert analysis.fit_exponent(s, 3 * s ** 2) == pytest.approx(2.0)
    assert analysis.fit_exponent(-s, 0.5 * s) == pytest.approx(1.0)
    assert np.isnan(analysis.fit_exponent([0.5, 0.6], [1, 2]))


def test_pareto_probe():
    assert analysis.pareto_probe(1.0, 0.0) == (0.0, 0.0, 0.0)
    probe = analysis.pareto_probe(1.0, 0.05)
    assert probe.rel_fluct_change <= 0
    assert abs(probe.rel_power_change) < abs(probe.rel_fluct_change)
    assert abs(probe.shift) == 0.05


def test_drift_csv(tmp_path, drift_1):
    path = tmp_path / "d.csv"
    analysis.write_drift_csv(drift_1[:1], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "gamma_tau,beta_delta,rel_power_change,rel_fluct_change"
    assert len(lines) == 1 + len(drift_1[0].shift_values)
