import warnings
from functools import lru_cache

import pytest

from afkp.eigensolver import GapLabelWarning, solve_spectrum
from afkp.potential import lattice


@lru_cache(maxsize=None)
def spectrum(delta, n=60, h=50.0, L=10.0, M=10):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GapLabelWarning)
        return solve_spectrum(lattice(L, M, h, delta), n)


@pytest.fixture(scope="session")
def spec_factory():
    return spectrum


# filled by test_acceptance, printed once at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
