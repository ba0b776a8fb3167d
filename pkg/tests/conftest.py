import numpy as np
import pytest

from qconn.lattice import LatticeManifold


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def flat4():
    return LatticeManifold.flat((4, 4, 4), (1.0, 1.0, 1.0))


def random_algebra(rng, n=2, norm=1.0, traceless=True):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    x = 0.5 * (a - a.conj().T)
    if traceless:
        x -= np.trace(x) / n * np.eye(n)
    return norm * x / np.linalg.norm(x)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
