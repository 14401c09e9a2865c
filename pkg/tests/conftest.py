import os
import sys

import pytest
from hypothesis import settings

from szilard import optimal

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def optimal_pair_1():
    """Optimal protocols (branch 0, branch 1) at gamma_tau = 1."""
    return tuple(optimal.build_optimal_protocol(1.0, branch=b)[0] for b in (0, 1))


@pytest.fixture(scope="session")
def solutions_1():
    return tuple(optimal.solve(1.0, b) for b in (0, 1))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
