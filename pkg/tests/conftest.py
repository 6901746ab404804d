import numpy as np
import pytest

from fvmbem.mesh import build_dual, build_lshape_mesh, build_uniform_square_mesh

ACCEPTANCE_LINES = []


def record(line):
    """Collect a criterion line for the terminal summary and echo it."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def square_mesh():
    return build_uniform_square_mesh(0.0, 0.5, 0.125)


@pytest.fixture(scope="session")
def lshape_mesh():
    return build_lshape_mesh(0.125)


@pytest.fixture(scope="session")
def test_meshes():
    return [build_uniform_square_mesh(0.0, 0.5, 0.125),
            build_uniform_square_mesh(-0.25, 0.25, 0.0625),
            build_lshape_mesh(0.0625)]


@pytest.fixture(scope="session")
def square_dual(square_mesh):
    return build_dual(square_mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
