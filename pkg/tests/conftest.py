import sys

import numpy as np
import pytest

from proxkit.objective import LassoProblem


def random_problem(rng, d=None, m=None, alpha=None):
    d = d or int(rng.integers(1, 21))
    m = m or int(rng.integers(1, 51))
    A = rng.standard_normal((m, d))
    b = rng.standard_normal(m)
    return LassoProblem(A, b, alpha if alpha is not None else float(rng.uniform(0.001, 0.5)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_problem():
    return random_problem


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    RESULTS = module.RESULTS
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
