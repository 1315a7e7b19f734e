import numpy as np
import pytest
from numpy.polynomial.hermite import hermval

from parametric_modes import make_grid

ACCEPTANCE_LINES: list[str] = []


def hermite_gauss(grid, n, scale=1.0, shift=0.0, chirp=0.0):
    """``n`` weighted-orthonormal Hermite-Gauss-like functions on ``grid``.

    The linear phase ``chirp * x`` makes them genuinely complex.
    """
    x = (grid.points - shift) / scale
    raw = np.array([hermval(x, [0] * k + [1]) * np.exp(-x ** 2 / 2) for k in range(n)], dtype=complex)
    raw *= np.exp(1j * chirp * grid.points)
    sw = grid.sqrt_weights
    q, _ = np.linalg.qr((raw * sw).T)
    return q.T / sw


@pytest.fixture
def small_grid():
    return make_grid(-8.0, 8.0, 121)


@pytest.fixture
def mode_families(small_grid):
    """Four distinct orthonormal families for synthetic kernels."""
    def make(n):
        return (hermite_gauss(small_grid, n, 1.0, 0.0, 0.3),
                hermite_gauss(small_grid, n, 1.3, 0.5, -0.2),
                hermite_gauss(small_grid, n, 0.9, -0.3, 0.1),
                hermite_gauss(small_grid, n, 1.1, 0.2, 0.7))
    return make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
