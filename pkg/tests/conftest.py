import numpy as np
import pytest

from dirichlet_sets import cones

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sym(rng, n, size=None):
    shape = (n, n) if size is None else (size, n, n)
    X = rng.standard_normal(shape)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def heavy_sym(rng, n, size):
    return cones.sample_sym(rng, n, size)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
