import numpy as np
import pytest

from srforms import geodesic as gmod
from srforms import ruled as rmod
from srforms.spaceform import space_form


@pytest.fixture(scope="session")
def sphere():
    return space_form("sphere3")


@pytest.fixture(scope="session")
def heis():
    return space_form("heisenberg")


@pytest.fixture(scope="session")
def rp3():
    return space_form("projective3")


@pytest.fixture(scope="session")
def great_circle(sphere):
    p = sphere.point([1.0, 0.0, 0.0, 0.0])
    w = sphere.tangent(p, [0.0, 0.0, 1.0, 0.0])
    return gmod.shoot(sphere, p, w, 0.0, 2.0 * np.pi + 0.01)


@pytest.fixture(scope="session")
def torus_assembly(great_circle):
    """Reference torus: C_0(Gamma) over the horizontal great circle."""
    return rmod.assemble_cmc(great_circle, 0.0)


@pytest.fixture(scope="session")
def heis_assembly(heis):
    """Open Heisenberg assembly over a horizontal line, lam = 1."""
    p = heis.point([0.0, 0.0, 0.0])
    w = heis.tangent(p, [1.0, 0.0, 0.0])
    g = gmod.shoot(heis, p, w, 0.0, 2.0 * np.pi)
    return rmod.assemble_cmc(g, 1.0, max_generations=2)


@pytest.fixture(scope="session")
def pansu_unit(sphere):
    return rmod.build_pansu(sphere, 1.0, n_directions=256, n_s=128)
