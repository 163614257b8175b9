import numpy as np
import pytest

from fraclab.discretization import assemble, build_grid, eigen_principal
from fraclab.models import Saturating, SourceSpec
from fraclab.stationary import solve_pure_singular

S = 0.25
Q = 0.5

# Discretization fixtures


@pytest.fixture(scope='module')
def grid():
    return build_grid(-1.0, 1.0, 32)


@pytest.fixture(scope='module')
def small_grid():
    return build_grid(-1.0, 1.0, 16)


@pytest.fixture(scope='module')
def operator(grid):
    return assemble(grid, S)


@pytest.fixture(scope='module')
def small_operator(small_grid):
    return assemble(small_grid, S)


@pytest.fixture(scope='module')
def eigenpair(operator):
    return eigen_principal(operator)


@pytest.fixture(scope='module')
def small_eigenpair(small_operator):
    return eigen_principal(small_operator)


# Solution fixtures


@pytest.fixture(scope='module')
def pure_singular(operator, eigenpair):
    return solve_pure_singular(Q, S, operator, eigenpair)


@pytest.fixture(scope='module')
def small_pure_singular(small_operator, small_eigenpair):
    return solve_pure_singular(Q, S, small_operator, small_eigenpair)


@pytest.fixture(scope='module')
def saturating():
    return Saturating(mu=0.5, c=0.1)


@pytest.fixture(scope='module')
def manufactured_source(small_pure_singular):
    """Source for which u(t) = e^t w solves the semi-discrete problem exactly on the small grid, t <= 1"""
    w = small_pure_singular.values

    def h(t, x):
        return np.exp(t) * w + (np.exp(t) - np.exp(-Q * t)) * w**-Q + 0 * x

    return SourceSpec(h, float(np.max(h(1.0, 0.0))))
