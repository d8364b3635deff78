import numpy as np
import pytest

from acoustic_limit.collision import KernelSpec, build_tables
from acoustic_limit.velocity_space import build_grid

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid():
    return build_grid(2)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(2, 6.0, 12)


@pytest.fixture(scope="session")
def hs_tables(grid):
    return build_tables(KernelSpec("hard-sphere"), grid)


@pytest.fixture(scope="session")
def maxwell_tables(grid):
    return build_tables(KernelSpec("maxwell"), grid)


@pytest.fixture(scope="session")
def small_tables(small_grid):
    return build_tables(KernelSpec("hard-sphere"), small_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
