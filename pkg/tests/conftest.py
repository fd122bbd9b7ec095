import numpy as np
import pytest

from efrsim import StaggeredGrid, VelocityField


def make_rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def random_field(grid, seed=0, scale=1.0):
    rng = make_rng(seed)
    n = grid.n
    return VelocityField(scale * rng.standard_normal((n, n)),
                         scale * rng.standard_normal((n, n)), grid)


def taylor_green(grid):
    """Single-mode vortex sampled at the staggered face locations."""
    n, h = grid.n, grid.h
    i = np.arange(n)
    xu = (i[:, None] + 1.0) * h
    yu = (i[None, :] + 0.5) * h
    xv = (i[:, None] + 0.5) * h
    yv = (i[None, :] + 1.0) * h
    return VelocityField(np.cos(2 * np.pi * xu) * np.sin(2 * np.pi * yu),
                         -np.sin(2 * np.pi * xv) * np.cos(2 * np.pi * yv), grid)


@pytest.fixture
def grid16():
    return StaggeredGrid(16)


@pytest.fixture
def grid32():
    return StaggeredGrid(32)


@pytest.fixture
def grid64():
    return StaggeredGrid(64)
