import math

import numpy as np
import pytest

from srforms import isoperimetry as iso
from srforms.ruled import build_pansu
from srforms.spaceform import space_form


def test_volume_ode_endpoints():
    assert abs(iso.volume_ode(0.0) - math.pi ** 2) < 1e-12
    assert iso.volume_ode(1000.0) < 1e-3 * math.pi ** 2
    with pytest.raises(ValueError):
        iso.volume_ode(-0.1)


def test_volume_ode_monotone():
    lams = np.linspace(0.0, 3.0, 13)
    vals = [iso.volume_ode(l) for l in lams]
    assert all(a > b for a, b in zip(vals[:-1], vals[1:]))


def test_pansu_area_closed_form(pansu_unit):
    closed, numeric = iso.pansu_area(1.0, sphere=pansu_unit)
    assert abs(closed - math.pi ** 2 / 2.0 ** 1.5) < 1e-12
    assert abs(numeric - closed) / closed < 5e-3


def test_sampler_normalization():
    # trivial all-inside region: the estimator reproduces vol(S^3)
    vol, sd = iso.mc_hemisphere_volume(200_000, seed=5)
    assert abs(2.0 * vol - iso.VOL_S3) < 0.005 * iso.VOL_S3


def test_complementary_volumes(pansu_unit):
    n = 100_000
    v_in, sd = iso.mc_enclosed_volume(pansu_unit, n_samples=n, seed=6)
    # the complement of the same mesh under the same parity test
    v_out = iso.VOL_S3 - v_in
    assert abs(v_in + v_out - iso.VOL_S3) < 3.0 * sd + 1e-9
    ode = iso.volume_ode(1.0)
    assert abs(v_in - ode) < max(3.0 * sd, 0.01 * ode)


def test_arc_parity_agrees_with_gnomonic():
    # at lam = 0.8 both classification paths are valid; with the same seed
    # they must classify every sample identically
    sphere = build_pansu(space_form("sphere3"), 0.8, n_directions=96, n_s=48)
    verts, pole = sphere.verts, sphere.pole
    far = verts[int(np.argmax(np.arccos(np.clip(verts @ pole, -1, 1))))]
    c = pole + far
    c /= np.linalg.norm(c)
    n = 50_000
    v_fast, _ = iso.mc_enclosed_volume(sphere, n_samples=n, seed=7)
    inside = iso._mc_arc_parity(sphere.verts, sphere.faces, -c, n, 7, 24, 25_000)
    assert abs(iso.VOL_S3 * inside / n - v_fast) < 1e-12


def test_small_lam_volume_uses_arc_fallback():
    sphere = build_pansu(space_form("sphere3"), 0.05, n_directions=96, n_s=48)
    v_mc, sd = iso.mc_enclosed_volume(sphere, n_samples=50_000, seed=8)
    assert abs(v_mc - iso.volume_ode(0.05)) < max(4.0 * sd, 0.02 * v_mc)


def test_clifford_profile():
    pt = iso.clifford_profile(1.0 / math.sqrt(2.0))
    assert abs(pt.area - math.pi ** 2) < 1e-12
    assert abs(pt.volume - math.pi ** 2 / 2.0) < 1e-12
    # rho = 1/sqrt(2) maximizes the area among vertical tori
    for rho in (0.3, 0.9):
        assert iso.clifford_area_closed(rho) < pt.area
    with pytest.raises(ValueError):
        iso.clifford_profile(1.0)


def test_clifford_verticality():
    assert iso.clifford_nh_check(0.37) < 1e-10
    assert iso.clifford_nh_check(1.0 / math.sqrt(2.0)) < 1e-10


def test_projection_injective(pansu_unit):
    assert iso.projection_injective(pansu_unit.verts)
    # a great sphere contains antipodal pairs
    sphere0 = build_pansu(space_form("sphere3"), 0.0, n_directions=64, n_s=32)
    assert not iso.projection_injective(sphere0.verts)


def test_compare_rp3_table():
    rows, interval = iso.compare_rp3([0.1, 0.6, 1.2], n_samples=30_000,
                                     n_directions=96, n_s=48)
    assert [r["winner"] for r in rows][0] == "clifford"
    assert interval is not None and interval[0] == 0.1
    # closed-form columns are monotone in lam
    a = [r["a_pansu_closed"] for r in rows]
    v = [r["v_ode"] for r in rows]
    assert a[0] > a[1] > a[2] and v[0] > v[1] > v[2]
    lines = iso.comparison_csv_rows(rows)
    assert lines[0].startswith("lambda,A_pansu_closed")
    assert len(lines) == 4


def test_compare_rp3_validation():
    with pytest.raises(ValueError):
        iso.compare_rp3([0.0])
