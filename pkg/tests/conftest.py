import numpy as np
import pytest

from surfns import geometry as geo
from surfns.harmonics import get_transform

_ACCEPTANCE_LINES = []


def acceptance_line(text):
    _ACCEPTANCE_LINES.append(text)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sphere8():
    return geo.build_sphere_grid(8, 1.0)


@pytest.fixture(scope="session")
def sphere8_r2():
    return geo.build_sphere_grid(8, 2.0)


@pytest.fixture(scope="session")
def sphere16():
    return geo.build_sphere_grid(16, 1.0)


@pytest.fixture(scope="session")
def torus64():
    return geo.build_torus_grid(64, 64, 2.0, 0.5)


@pytest.fixture(scope="session")
def tr8(sphere8):
    return get_transform(sphere8, 8)


@pytest.fixture(scope="session")
def rotation_field():
    def make(grid, axis):
        ax = np.zeros(3)
        ax[axis] = 1.0
        return geo.tangential_project(grid, np.cross(ax, grid.nodes))
    return make
