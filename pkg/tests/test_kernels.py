import numpy as np
import pytest

from srforms import kernels
from srforms.isoperimetry import sample_s3


def _have_compiled():
    try:
        kernels.get_backend("compiled")
        return True
    except ImportError:
        return False


needs_compiled = pytest.mark.skipif(not _have_compiled(),
                                    reason="compiled extension not built")


def _heis_batch(rng, n):
    p = rng.uniform(-1.0, 1.0, size=(n, 3))
    th = rng.uniform(0.0, 2.0 * np.pi, n)
    w = np.stack([np.cos(th), np.sin(th),
                  p[:, 1] * np.cos(th) - p[:, 0] * np.sin(th)], axis=1)
    return p, w


def _sphere_batch(rng, n):
    p = sample_s3(rng, n)
    v = rng.normal(size=(n, 4))
    v -= np.einsum("ni,ni->n", v, p)[:, None] * p
    T = np.stack([-p[:, 1], p[:, 0], -p[:, 3], p[:, 2]], axis=1)
    v -= np.einsum("ni,ni->n", v, T)[:, None] * T
    return p, v / np.linalg.norm(v, axis=1, keepdims=True)


@needs_compiled
@pytest.mark.parametrize("name", ["rk4_heisenberg", "rk4_sphere3"])
def test_backend_parity(name):
    rng = np.random.Generator(np.random.Philox(9))
    p, w = (_heis_batch if name == "rk4_heisenberg" else _sphere_batch)(rng, 8)
    py = kernels.get_backend("python")
    cc = kernels.get_backend("compiled")
    Pp, Vp = getattr(py, name)(p, w, 0.7, 1e-3, 2000, 100)
    Pc, Vc = getattr(cc, name)(p, w, 0.7, 1e-3, 2000, 100)
    assert np.abs(Pp - Pc).max() < 1e-9
    assert np.abs(Vp - Vc).max() < 1e-9


@needs_compiled
def test_radial_parity_parity():
    from srforms.isoperimetry import _bin_triangles, _cubemap_bins
    from srforms.ruled import build_pansu
    from srforms.spaceform import space_form

    sphere = build_pansu(space_form("sphere3"), 1.0, n_directions=64, n_s=32)
    verts, faces = sphere.verts, sphere.faces
    pole = sphere.pole
    far = verts[int(np.argmax(np.arccos(np.clip(verts @ pole, -1, 1))))]
    c = pole + far
    c /= np.linalg.norm(c)
    B = np.linalg.svd(c[None])[2][1:]
    tris = np.ascontiguousarray(((verts @ B.T) / (verts @ c)[:, None])[faces])
    bin_idx, bin_off = _bin_triangles(tris, 16)

    rng = np.random.Generator(np.random.Philox(10))
    x = sample_s3(rng, 20_000)
    keep = x @ c > 1e-9
    u = np.ascontiguousarray((x[keep] @ B.T) / (x[keep] @ c)[:, None])
    sb = _cubemap_bins(u / np.linalg.norm(u, axis=1, keepdims=True), 16)
    out_py = kernels.get_backend("python").radial_parity(u, tris, sb, bin_idx, bin_off)
    out_cc = kernels.get_backend("compiled").radial_parity(u, tris, sb, bin_idx, bin_off)
    assert np.array_equal(out_py, out_cc)


def test_rk4_order_sphere():
    # great circle, exact endpoint known: error scales like h^4
    p = np.array([[1.0, 0.0, 0.0, 0.0]])
    w = np.array([[0.0, 0.0, 1.0, 0.0]])
    length = 2.0

    def endpoint_err(h):
        n = int(round(length / h))
        P, _ = kernels.rk4_sphere3(p, w, 0.0, h, n, n)
        exact = np.cos(length) * p[0] + np.sin(length) * w[0]
        return np.abs(P[0, -1] - exact).max()

    e1, e2 = endpoint_err(1e-2), endpoint_err(5e-3)
    assert 14.0 < e1 / e2 < 18.0


def test_active_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.get_backend(None) is not None
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
