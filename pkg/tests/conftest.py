import numpy as np
import pytest

from choquard.exponents import ProblemParams
from choquard.grid import RadialGrid
from choquard.kernel import assemble_kernel
from choquard.solver import SolverConfig, solve_critical, solve_subcritical


@pytest.fixture(scope="session")
def grid3():
    return RadialGrid.default(3)


@pytest.fixture(scope="session")
def kernel31(grid3):
    return assemble_kernel(3, 1.0, grid3)


@pytest.fixture(scope="session")
def ground_state(grid3, kernel31):
    """Subcritical ground state for (N, alpha, mu, p) = (3, 0, 1, 2)."""
    params = ProblemParams(3, 0.0, 1.0, 2.0)
    u, rep = solve_subcritical(params, grid3, kernel31, SolverConfig())
    return params, u, rep


@pytest.fixture(scope="session")
def extremal(grid3, kernel31):
    """Critical extremal for (3, 0.25, 1) started from a Gaussian."""
    params = ProblemParams(3, 0.25, 1.0)
    u, rep = solve_critical(params, grid3, kernel31, SolverConfig(), init="gaussian")
    return params, u, rep


def compact_profile(grid, center=1.0, width=0.5):
    """Smooth bump in log r, zero far from both grid ends."""
    x = (np.log(grid.nodes) - np.log(center)) / width
    out = np.zeros(grid.n)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
