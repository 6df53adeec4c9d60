import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srforms.spaceform import (
    dilate,
    project_rp3,
    sasakian_residuals,
    space_form,
    webster_curvature,
)

MODELS = ("heisenberg", "sphere3", "projective3")


def _random_state(model, rng):
    pt = model.random_points(1, rng)[0]
    raw = rng.normal(size=model.dim)
    if model.kind != "heisenberg":
        raw = raw - np.dot(raw, pt) * pt
    p = model.point(pt)
    return p, model.tangent(p, raw)


@pytest.mark.parametrize("kind", MODELS)
def test_structure_residuals(kind):
    m = space_form(kind)
    rng = np.random.Generator(np.random.Philox(2))
    for _ in range(25):
        p, v = _random_state(m, rng)
        r = sasakian_residuals(m, p, v)
        assert r["reeb"] < 1e-5
        assert r["rotation"] < 1e-5


@pytest.mark.parametrize("kind", MODELS)
def test_flipped_rotation_is_detected(kind):
    m = space_form(kind)
    rng = np.random.Generator(np.random.Philox(3))
    p, v = _random_state(m, rng)
    r = sasakian_residuals(m, p, v, flip_j=True)
    assert r["reeb"] > 0.1  # wrong handedness is loud, not subtle


@pytest.mark.parametrize("kind,target", [("heisenberg", 0.0), ("sphere3", 1.0),
                                         ("projective3", 1.0)])
def test_webster_curvature(kind, target):
    m = space_form(kind)
    rng = np.random.Generator(np.random.Philox(4))
    pts = m.random_points(50, rng)
    assert np.abs(webster_curvature(m, pts) - target).max() < 1e-3


@pytest.mark.parametrize("kind", MODELS)
def test_frame_orthonormal_and_j_square(kind):
    m = space_form(kind)
    rng = np.random.Generator(np.random.Philox(5))
    pts = m.random_points(40, rng)
    X1, X2, T = m.frame_b(pts)
    for a, u in enumerate((X1, X2, T)):
        for b, v in enumerate((X1, X2, T)):
            want = 1.0 if a == b else 0.0
            assert np.abs(m.inner_b(pts, u, v) - want).max() < 1e-9
    # J rotates the horizontal plane by 90 degrees: J X1 = X2, J^2 = -1
    assert np.abs(m.jrot_b(pts, X1) - X2).max() < 1e-9
    assert np.abs(m.jrot_b(pts, m.jrot_b(pts, X1)) + X1).max() < 1e-9


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-2.0, 2.0),
       st.floats(-0.8, 0.8))
@settings(max_examples=40, deadline=None)
def test_heisenberg_dilation_group(x, y, t, r):
    m = space_form("heisenberg")
    p = m.point([x, y, t])
    q = dilate(dilate(p, r), -r)
    assert np.abs(q.array() - p.array()).max() < 1e-12
    d = dilate(p, r).array()
    assert abs(d[0] - np.exp(r) * x) < 1e-12
    assert abs(d[2] - np.exp(2.0 * r) * t) < 1e-12


def test_dilation_scales_inner_product():
    # horizontal lengths scale by e^r, so the metric pairing of pushed
    # frame vectors at the pushed point is e^{2r} times the original
    m = space_form("heisenberg")
    rng = np.random.Generator(np.random.Philox(6))
    pts = m.random_points(20, rng)
    r = 0.37
    X1, X2, _ = m.frame_b(pts)
    scale = np.diag([np.exp(r), np.exp(r), np.exp(2.0 * r)])
    dpts = pts @ scale.T
    for u in (X1, X2):
        du = u @ scale.T
        ratio = m.inner_b(dpts, du, du) / m.inner_b(pts, u, u)
        assert np.abs(ratio - np.exp(2.0 * r)).max() < 1e-10


def test_project_rp3_identifies_antipodes():
    m = space_form("sphere3")
    p = project_rp3(m.point([0.6, 0.0, -0.8, 0.0]))
    q = project_rp3(m.point([-0.6, 0.0, 0.8, 0.0]))
    assert p.kind == "projective3" == q.kind
    assert np.abs(p.array() - q.array()).max() < 1e-12


def test_point_validation():
    m = space_form("sphere3")
    with pytest.raises(ValueError):
        m.point([1.0, 1.0, 0.0, 0.0])  # not unit
    with pytest.raises(ValueError):
        space_form("heisenberg").point([0.0, 0.0])  # wrong dimension
    with pytest.raises(ValueError):
        space_form("nope")
