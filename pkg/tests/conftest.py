import numpy as np
import pytest

from statorsim.hamiltonian import CouplingSet
from statorsim.lattice import LatticeGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def g22():
    return LatticeGeometry(2, 2)


@pytest.fixture(scope="session")
def unit():
    return CouplingSet()


def random_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
