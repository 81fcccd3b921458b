import numpy as np
import pytest

from dislocnet.kernel import KernelOnCircle, MaterialCubic
from dislocnet.linetension import Psi0

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mat():
    """mu = 4 pi, nu = 1/3 so that mu/(4 pi) = 1 and eta = 1/2."""
    return MaterialCubic(mu=4 * np.pi, nu=1 / 3)


@pytest.fixture(scope="session")
def cubic_kernel(mat):
    return KernelOnCircle.cubic(mat)


@pytest.fixture(scope="session")
def cubic_psi0(mat):
    return Psi0.cubic(mat)


def unit(theta):
    return np.array([np.cos(theta), np.sin(theta)])
