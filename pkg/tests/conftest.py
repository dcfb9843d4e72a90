import numpy as np
import pytest

from lsl_lab.hilbert import build_grid, random_dense, sample_dense, sample_separable


@pytest.fixture
def grid16():
    return build_grid(4.0, 8)


@pytest.fixture
def grid64():
    return build_grid(4.0, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@pytest.fixture
def potentials16(grid16):
    return {
        "yamaguchi": sample_separable(grid16, 0.5),
        "gaussian": sample_dense(grid16),
        "random": random_dense(grid16, 0.5, seed=7),
    }


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
