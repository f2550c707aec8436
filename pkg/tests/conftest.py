import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from scfcq.simulation import DGP_I, DgpSpec, calibrate_beta0  # noqa: E402

# Pinned bisection output for the DGP I intercept (30% of Y* <= 0).
BETA0_DGP_I = 0.63837


@pytest.fixture(scope="session")
def dgp1():
    return DgpSpec(DGP_I, beta0=calibrate_beta0(DgpSpec(DGP_I)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
