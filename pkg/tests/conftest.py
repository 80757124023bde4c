import numpy as np
import pytest

from patankar_lab.models import GridSpec, make_diffusion, make_upwind_advection
from patankar_lab.numkernel import CirculantOperator


def dense_circulant(first_column):
    """Oracle materialization, row by row via the defining index rule."""
    c = np.asarray(first_column, dtype=float)
    m = c.size
    return np.array([[c[(i - j) % m] for j in range(m)] for i in range(m)])


def direct_dft(x, inverse=False):
    x = np.asarray(x, dtype=complex)
    m = x.size
    sign = 1.0 if inverse else -1.0
    out = np.array([sum(x[j] * np.exp(sign * 2j * np.pi * j * k / m) for j in range(m)) for k in range(m)])
    return out / m if inverse else out


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def scalar_decay_op():
    """u' = -u as a 1x1 circulant."""
    return CirculantOperator(np.array([-1.0]))


def operator(kind, m):
    grid = GridSpec(m)
    return make_diffusion(grid) if kind == "diffusion" else make_upwind_advection(grid)


def cfl_dt(kind, m):
    dx = 1.0 / m
    return dx * dx / 2 if kind == "diffusion" else dx


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
