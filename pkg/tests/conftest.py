import numpy as np
import pytest

from nosignlab.fields import Grid, ScalarField
from nosignlab.solver import SolveParams, make_fixture, solve_no_sign, solve_obstacle_psor, fixture_function


@pytest.fixture(scope="session")
def grid129():
    return Grid.square(129)


@pytest.fixture(scope="session")
def grid65():
    return Grid.square(65)


@pytest.fixture(scope="session")
def fixtures129(grid129):
    return {k: make_fixture(k, grid129) for k in ("half_space", "polynomial", "radial")}


@pytest.fixture(scope="session")
def radial_solve129(grid129):
    g = fixture_function("radial", 0.5)[0]
    return solve_no_sign(1.0, g, SolveParams(), grid=grid129)


@pytest.fixture(scope="session")
def radial_psor129(grid129):
    g = fixture_function("radial", 0.5)[0]
    return solve_obstacle_psor(1.0, g, SolveParams(), grid=grid129)


def field(grid, fn, name="u"):
    return ScalarField.from_function(grid, fn, name)


def rng(seed=0):
    return np.random.default_rng(seed)
