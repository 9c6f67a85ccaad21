import numpy as np
import pytest

from gafzeros.rng import RandomStream

# filled by test_acceptance; printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def stream():
    return RandomStream(20240601)


def rel_err(a, b):
    return abs(a - b) / abs(b)


def within_sigma(x, expected, k=4.0):
    x = np.asarray(x)
    se = x.std(ddof=1) / np.sqrt(x.size)
    return abs(x.mean() - expected) <= k * se


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
