import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srforms import geodesic as gmod
from srforms.spaceform import space_form


def _shoot_default(kind, lam, length, step=1e-3):
    m = space_form(kind)
    if kind == "heisenberg":
        p = m.point([0.0, 0.0, 0.0])
        w = m.tangent(p, [1.0, 0.0, 0.0])
    else:
        p = m.point([1.0, 0.0, 0.0, 0.0])
        w = m.tangent(p, [0.0, 0.0, 1.0, 0.0])
    return gmod.shoot(m, p, w, lam, length, step)


def test_shoot_validates_direction():
    m = space_form("sphere3")
    p = m.point([1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        gmod.shoot(m, p, m.tangent(p, [0.0, 0.0, 2.0, 0.0]), 0.0, 1.0)  # not unit
    with pytest.raises(ValueError):
        # T(p) = (0, 1, 0, 0) is vertical at the base point
        gmod.shoot(m, p, m.tangent(p, [0.0, 1.0, 0.0, 0.0]), 0.0, 1.0)
    with pytest.raises(ValueError):
        gmod.shoot(m, p, m.tangent(p, [0.0, 0.0, 1.0, 0.0]), 0.0, -1.0)


@pytest.mark.parametrize("kind,lam", [("heisenberg", 0.7), ("sphere3", 0.7),
                                      ("projective3", 1.3)])
def test_conservation(kind, lam):
    g = _shoot_default(kind, lam, 5.0)
    assert g.speed_drift() / g.length < 1e-7
    assert g.vertical_drift() / g.length < 1e-7
    assert np.abs(g.curvature_estimate() - lam).max() / g.length < 1e-7


def test_great_circle_closure():
    g = _shoot_default("sphere3", 0.0, 2.0 * np.pi + 0.01)
    cl = gmod.detect_closure(g)
    assert cl.is_circle
    assert abs(cl.length - 2.0 * np.pi) < 1e-9


def test_rp3_closure_is_half():
    g = _shoot_default("projective3", 0.0, 2.0 * np.pi + 0.01)
    cl = gmod.detect_closure(g)
    assert cl.is_circle
    assert abs(cl.length - np.pi) < 1e-9


def test_heisenberg_line_and_spiral():
    # lam = 0 is a straight line; lam != 0 closes in the (x, y) plane but
    # drifts vertically, so the state never returns
    g0 = _shoot_default("heisenberg", 0.0, 7.0)
    assert gmod.detect_closure(g0).kind == "injective"
    g1 = _shoot_default("heisenberg", 1.0, 4.0 * np.pi)
    assert gmod.detect_closure(g1).kind == "injective"
    # vertical gain over one (x, y) period of a unit-curvature geodesic
    p, _ = g1.state_at(2.0 * np.pi)
    assert abs(p[0]) < 1e-8 and abs(p[1]) < 1e-8
    assert p[2] > 1.0  # strictly positive drift


def test_sphere_lam1_does_not_close():
    # the two frequencies are incommensurable at lam = 1, kappa = 1
    g = _shoot_default("sphere3", 1.0, 12.0)
    assert gmod.detect_closure(g).kind == "injective"


def test_state_at_matches_samples():
    g = _shoot_default("sphere3", 0.4, 3.0)
    for s in (0.0, 0.5, 1.2345, 3.0):
        p, v = g.state_at(s)
        k = int(round(s / g.step))
        if abs(k * g.step - s) < 1e-12:
            assert np.abs(p - g.points[k]).max() < 1e-12
    with pytest.raises(ValueError):
        g.state_at(3.5)


@given(st.floats(0.3, 12.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
       st.floats(-2.0, 2.0))
@settings(max_examples=60, deadline=None)
def test_vertical_jacobi_solves_ode(tau, v0, dv0, ddv0):
    vj = gmod.vertical_jacobi(tau, v0, dv0, ddv0)
    s = np.linspace(0.0, 3.0, 17)
    assert np.abs(vj.dddv(s) + tau * vj.dv(s)).max() < 1e-9 * max(1.0, tau)
    assert abs(vj.v(0.0) - v0) < 1e-12
    assert abs(vj.dv(0.0) - dv0) < 1e-12
    assert abs(vj.ddv(0.0) - ddv0) < 1e-10


def test_vertical_jacobi_flat_branch():
    vj = gmod.vertical_jacobi(0.0, 1.0, -2.0, 0.5)
    assert abs(vj.v(2.0) - (1.0 - 4.0 + 1.0)) < 1e-12
    with pytest.raises(ValueError):
        gmod.vertical_jacobi(-1.0, 0.0, 0.0, 0.0)


def jacobi_pencil_error(kind, lam, mu, side=1, e0=0.15, length=1.0):
    """Sup distance between the closed-form Jacobi field of the normal
    pencil along a curvature-mu generator and its finite-difference
    oracle (side i rays, centered at arclength e0 of the generator)."""
    m = space_form(kind)
    if kind == "heisenberg":
        p = m.point([0.0, 0.0, 0.0])
        w = m.tangent(p, [1.0, 0.0, 0.0])
    else:
        p = m.point([1.0, 0.0, 0.0, 0.0])
        w = m.tangent(p, [0.0, 0.0, 1.0, 0.0])
    gen = gmod.shoot(m, p, w, mu, 2.0 * e0, 1e-4)
    sgn = 1.0 if side == 1 else -1.0

    def gamma_fn(e):
        return gen.state_at(e0 + e)[0]

    def u_fn(e):
        pt, vt = gen.state_at(e0 + e)
        return sgn * m.jrot_b(pt[None], vt[None])[0]

    s_grid = np.linspace(0.0, length, 21)
    fd = gmod.jacobi_fd_oracle(m, gamma_fn, u_fn, lam, s_grid, 1e-4, step=1e-3)

    kappa = 0.0 if kind == "heisenberg" else 1.0
    tau = 4.0 * (lam * lam + kappa)
    vj = gmod.vertical_jacobi(tau, 0.0, -2.0 * sgn, -4.0 * mu)
    p0 = m.point(gamma_fn(0.0))
    ray = gmod.shoot(m, p0, m.tangent(p0, u_fn(0.0)), lam, length, step=length / 20)
    X = gmod.jacobi_vector(ray, vj, 0.0, 0.0)
    return float(np.abs(X - fd).max())


def test_jacobi_vs_fd_oracle():
    assert jacobi_pencil_error("sphere3", 0.8, 0.4) < 1e-4
    assert jacobi_pencil_error("sphere3", 1.5, -0.7, side=2) < 1e-4
    assert jacobi_pencil_error("heisenberg", 1.0, 0.3) < 1e-4
