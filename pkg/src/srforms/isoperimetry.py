"""Isoperimetric profiles: Pansu spheres vs vertical Clifford tori.

Closed forms on the spherical models:

    A(S_lam) = pi^2 / (1 + lam^2)^{3/2},
    A(T_rho) = 2 pi^2 rho sqrt(1 - rho^2)   (in RP^3),

with the Clifford torus T_rho splitting RP^3 (volume pi^2) into domains of
volume pi^2 rho^2 and pi^2 (1 - rho^2).  Pansu volumes come from the CMC
first-variation identity A'(lam) + 2 lam V'(lam) = 0 integrated from
V(0) = pi^2 (half of vol(S^3) = 2 pi^2), written with the sign that makes
V decrease to 0, and are cross-validated by a Monte Carlo inside-test:
each uniform S^3 sample is classified by the crossing parity of a great
circle arc against the mesh.  When the mesh fits in an open hemisphere
the arc test reduces to Euclidean ray casting in the gnomonic chart
centered between the two poles (great circles through the chart center
project to straight lines); for small lam the sphere approaches a great
2-sphere, no hemisphere contains it, and the parity is computed with
exact arcs from a reference exterior point instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .quadrature import adaptive_simpson
from .ruled import PansuSphere, build_pansu, mesh_area_sub
from .spaceform import space_form

__all__ = [
    "IsoProfilePoint",
    "pansu_area",
    "pansu_volume",
    "volume_ode",
    "clifford_profile",
    "clifford_nh_check",
    "compare_rp3",
    "comparison_csv_rows",
    "sample_s3",
    "mc_enclosed_volume",
    "mc_hemisphere_volume",
    "projection_injective",
]

VOL_S3 = 2.0 * math.pi ** 2
VOL_RP3 = math.pi ** 2
DEFAULT_SEED = 20260823


@dataclass(frozen=True)
class IsoProfilePoint:
    family: str  # "pansu" | "clifford"
    param: float  # lam or rho
    area: float
    volume: float
    ambient: str


def pansu_area_closed(lam):
    return math.pi ** 2 / (1.0 + lam * lam) ** 1.5


def pansu_area(lam, sphere: PansuSphere | None = None, n_directions=256, n_s=128):
    """(closed, numeric) Pansu areas; numeric from the mesh quadrature."""
    closed = pansu_area_closed(lam)
    if sphere is None:
        sphere = build_pansu(space_form("sphere3"), lam, n_directions=n_directions, n_s=n_s)
    return closed, sphere.area()


def volume_ode(lam, tol=1e-12):
    """V(lam) from A'(t) + 2 t V'(t) = 0, V(0) = pi^2: the closed area
    formula gives V(lam) = pi^2 (1 - (3/2) int_0^lam (1+t^2)^{-5/2} dt)."""
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    if lam == 0.0:
        return math.pi ** 2
    # substitute t = tan(u): the integrand becomes cos^3(u), no infinite tail
    upper = math.atan(lam)
    integral = adaptive_simpson(lambda u: math.cos(u) ** 3, 0.0, upper, tol=tol)
    return math.pi ** 2 * (1.0 - 1.5 * integral)


def sample_s3(rng, n):
    """Uniform points on S^3 (normalized 4-d Gaussians)."""
    x = rng.normal(size=(n, 4))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _ortho_basis(c):
    return np.linalg.svd(np.asarray(c, dtype=float)[None])[2][1:]


def _cubemap_bins(dirs, na):
    """Cube-map bin index for each unit direction (6 na^2 bins)."""
    dirs = np.asarray(dirs, dtype=float)
    ax = np.argmax(np.abs(dirs), axis=1)
    lead = dirs[np.arange(len(dirs)), ax]
    face = 2 * ax + (lead < 0.0)
    rest = np.empty((len(dirs), 2))
    for a in range(3):
        other = [b for b in range(3) if b != a]
        m = ax == a
        rest[m] = dirs[np.ix_(m.nonzero()[0], other)]
    rest = rest / np.abs(lead)[:, None]
    ij = np.clip(((rest + 1.0) * 0.5 * na).astype(np.int64), 0, na - 1)
    return face * na * na + ij[:, 0] * na + ij[:, 1]


def _cell_centers(na):
    """Unit direction at the center of every cube-map cell."""
    t = (np.arange(na) + 0.5) * 2.0 / na - 1.0
    u, v = np.meshgrid(t, t, indexing="ij")
    u, v = u.ravel(), v.ravel()
    out = np.empty((6 * na * na, 3))
    for ax in range(3):
        other = [b for b in range(3) if b != ax]
        for s, sign in enumerate((1.0, -1.0)):
            block = np.zeros((na * na, 3))
            block[:, ax] = sign
            block[:, other[0]] = u
            block[:, other[1]] = v
            f = 2 * ax + s
            out[f * na * na:(f + 1) * na * na] = block
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _bin_triangles(tris, na):
    """Candidate triangle lists per direction bin (conservative cones)."""
    centers = _cell_centers(na)
    tree = cKDTree(centers)
    vdirs = tris / np.linalg.norm(tris, axis=2, keepdims=True)
    cone = vdirs.mean(axis=1)
    cone = cone / np.linalg.norm(cone, axis=1, keepdims=True)
    cosang = np.einsum("mki,mi->mk", vdirs, cone).min(axis=1).clip(-1.0, 1.0)
    half = np.arccos(cosang)
    cell_rad = 2.0 / na  # conservative angular radius of a cube-map cell
    radius = 2.0 * np.sin(np.minimum(0.5 * (half + cell_rad + 0.05), 0.5 * np.pi))
    nbins = 6 * na * na
    per_bin = [[] for _ in range(nbins)]
    for t, cells in enumerate(tree.query_ball_point(cone, np.asarray(radius))):
        for cidx in cells:
            per_bin[cidx].append(t)
    idx = np.concatenate([np.asarray(b, dtype=np.int64) for b in per_bin]) if any(
        per_bin) else np.empty(0, dtype=np.int64)
    off = np.zeros(nbins + 1, dtype=np.int64)
    off[1:] = np.cumsum([len(b) for b in per_bin])
    return idx, off


def _cross4(a, b, c):
    """Generalized cross product: the 4-vector orthogonal to a, b, c."""
    M = np.stack([a, b, c], axis=-2)  # (..., 3, 4)
    cols = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]
    signs = (1.0, -1.0, 1.0, -1.0)
    return np.stack(
        [s * np.linalg.det(M[..., :, k]) for s, k in zip(signs, cols)], axis=-1)


def _mc_arc_parity(verts, faces, e, n_samples, seed, na, block):
    """Inside fraction by exact great-arc ray casting from the exterior
    reference point e (odd crossing parity of the arc e -> x means x is
    inside).  No hemisphere restriction on the mesh."""
    V = verts[faces]  # (m, 3, 4)
    gram = np.einsum("mia,mja->mij", V, V)
    keep = np.linalg.det(gram) > 1e-20  # drop slivers welded to a point
    V, gram = V[keep], gram[keep]
    n = _cross4(V[:, 0], V[:, 1], V[:, 2])
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    G = np.einsum("mij,mja->mia", np.linalg.inv(gram), V)  # cone coordinates
    A = n @ e  # <n, e> per triangle

    # direction bins: the arc from e with tangent u meets triangle i only
    # when the great circle through e, u passes within the triangle cone,
    # i.e. |<u, m_perp>| is large; that is a pair of antipodal caps in the
    # 2-sphere of tangents at e
    B = _ortho_basis(e)
    vdirs = V / np.linalg.norm(V, axis=2, keepdims=True)
    cone = vdirs.mean(axis=1)
    cone = cone / np.linalg.norm(cone, axis=1, keepdims=True)
    r_tri = np.arccos(np.einsum("mka,ma->mk", vdirs, cone).min(axis=1).clip(-1.0, 1.0))
    Em = cone @ e
    perp = cone - Em[:, None] * e
    rho = np.linalg.norm(perp, axis=1)
    rho = np.maximum(rho, 1e-15)
    mperp = (perp / rho[:, None]) @ B.T
    cos_r = np.cos(np.minimum(r_tri + 0.03, 0.5 * np.pi))
    cap = np.arccos((np.sqrt(np.maximum(cos_r ** 2 - Em ** 2, 0.0)) / rho).clip(0.0, 1.0))

    centers = _cell_centers(na)
    tree = cKDTree(centers)
    cell_rad = 2.0 / na
    radius = 2.0 * np.sin(np.minimum(0.5 * (cap + cell_rad + 0.05), 0.5 * np.pi))
    nbins = 6 * na * na
    per_bin = [[] for _ in range(nbins)]
    for t, cells in enumerate(tree.query_ball_point(mperp, radius)):
        for cidx in cells:
            per_bin[cidx].append(t)
    for t, cells in enumerate(tree.query_ball_point(-mperp, radius)):
        for cidx in cells:
            per_bin[cidx].append(t)
    cand = [np.unique(np.asarray(b, dtype=np.int64)) for b in per_bin]

    rng = np.random.Generator(np.random.Philox(seed))
    inside = 0
    for start in range(0, n_samples, block):
        x = sample_s3(rng, min(block, n_samples - start))
        cx = (x @ e).clip(-1.0, 1.0)
        t_x = np.arccos(cx)
        w = x - cx[:, None] * e
        wn = np.linalg.norm(w, axis=1)
        ok = wn > 1e-12  # samples at +-e are classified by convention
        u = w[ok] / wn[ok, None]
        t_x = t_x[ok]
        bins = _cubemap_bins(u @ B.T, na)
        order = np.argsort(bins, kind="stable")
        counts = np.zeros(len(u), dtype=np.int64)
        bounds = np.searchsorted(bins[order], np.arange(nbins + 1))
        for b in range(nbins):
            lo, hi = bounds[b], bounds[b + 1]
            if lo == hi or len(cand[b]) == 0:
                continue
            sel = order[lo:hi]
            ci = cand[b]
            U = u[sel]  # (S, 4)
            NU = n[ci] @ U.T  # (C, S)
            t1 = np.arctan2(-A[ci][:, None], NU) % np.pi
            for tt in (t1, t1 + np.pi):
                win = (tt > 1e-9) & (tt < t_x[sel][None, :] - 1e-9)
                if not win.any():
                    continue
                p = (np.cos(tt)[:, :, None] * e[None, None, :]
                     + np.sin(tt)[:, :, None] * U[None, :, :])
                alpha = np.einsum("cia,csa->csi", G[ci], p)
                hit = win & (alpha.min(axis=2) >= -1e-9)
                counts[sel] += hit.sum(axis=0)
        inside += int((counts % 2 == 1).sum())
    return inside


def mc_enclosed_volume(sphere: PansuSphere, n_samples=1_000_000, seed=DEFAULT_SEED,
                       na=24, block=200_000):
    """Monte Carlo volume of the region enclosed by a Pansu sphere in S^3.

    Fast path: gnomonic chart centered at the midpoint c of the two poles
    with binned Euclidean ray casting, valid when the mesh lies in the
    open hemisphere around c.  Otherwise exact great-arc parity from the
    reference exterior point -c.  Returns (volume, stderr).
    """
    verts, faces = sphere.verts, sphere.faces
    pole = sphere.pole
    if sphere.lam < 1e-12:
        # S_0 is the equator <x, pole> = 0; the enclosed half is the
        # pole-side hemisphere
        rng = np.random.Generator(np.random.Philox(seed))
        inside = 0
        for start in range(0, n_samples, block):
            x = sample_s3(rng, min(block, n_samples - start))
            inside += int((x @ pole > 0.0).sum())
        p = inside / n_samples
        return VOL_S3 * p, VOL_S3 * math.sqrt(p * (1.0 - p) / n_samples)
    ang = np.arccos(np.clip(verts @ pole, -1.0, 1.0))
    far = verts[int(np.argmax(ang))]
    c = pole + far
    c = c / np.linalg.norm(c)
    cosv = verts @ c
    edge = float(np.linalg.norm(verts[faces[:, 1]] - verts[faces[:, 0]], axis=1).mean())
    if cosv.min() < math.sin(0.05):
        # near-degenerate sphere (close to a great 2-sphere): exact arcs
        if min(np.linalg.norm(verts - c, axis=1).min(),
               np.linalg.norm(verts + c, axis=1).min()) < 3.0 * edge:
            raise ValueError("axis midpoints are not clearly off the mesh")
        inside = _mc_arc_parity(verts, faces, -c, n_samples, seed, na, block)
        p = inside / n_samples
        return VOL_S3 * p, VOL_S3 * math.sqrt(max(p * (1.0 - p), 1e-300) / n_samples)
    if np.linalg.norm(verts + c, axis=1).min() < 3.0 * edge:
        raise ValueError("antipode of the chart center is not clearly exterior")
    B = _ortho_basis(c)
    chart = (verts @ B.T) / cosv[:, None]
    tris = np.ascontiguousarray(chart[faces])
    bin_idx, bin_off = _bin_triangles(tris, na)

    rng = np.random.Generator(np.random.Philox(seed))
    inside = 0
    for start in range(0, n_samples, block):
        x = sample_s3(rng, min(block, n_samples - start))
        cx = x @ c
        keep = cx > 1e-9
        u = (x[keep] @ B.T) / cx[keep][:, None]
        dirs = u / np.linalg.norm(u, axis=1, keepdims=True)
        sb = _cubemap_bins(dirs, na)
        par = kernels.radial_parity(np.ascontiguousarray(u), tris, sb, bin_idx, bin_off)
        inside += int(par.sum())
    p = inside / n_samples
    return VOL_S3 * p, VOL_S3 * math.sqrt(max(p * (1.0 - p), 1e-300) / n_samples)


def mc_hemisphere_volume(n_samples=1_000_000, seed=DEFAULT_SEED):
    """Sampler check: volume of a hemisphere of S^3 (exact pi^2)."""
    rng = np.random.Generator(np.random.Philox(seed))
    x = sample_s3(rng, n_samples)
    p = float((x[:, 0] > 0.0).mean())
    return VOL_S3 * p, VOL_S3 * math.sqrt(p * (1.0 - p) / n_samples)


def pansu_volume(lam, sphere: PansuSphere | None = None, n_samples=1_000_000,
                 seed=DEFAULT_SEED, n_directions=256, n_s=128):
    """(ode, montecarlo, flagged): the two volume estimates; flagged marks
    disagreement beyond 2% (the Monte Carlo value is then authoritative)."""
    ode = volume_ode(lam)
    if sphere is None:
        sphere = build_pansu(space_form("sphere3"), lam, n_directions=n_directions, n_s=n_s)
    mc, _ = mc_enclosed_volume(sphere, n_samples=n_samples, seed=seed)
    flagged = abs(mc - ode) > 0.02 * max(abs(mc), 1e-12)
    return ode, mc, flagged


def clifford_area_closed(rho):
    return 2.0 * math.pi ** 2 * rho * math.sqrt(1.0 - rho * rho)


def clifford_points(rho, n=256, seed=DEFAULT_SEED):
    rng = np.random.Generator(np.random.Philox(seed))
    a = rng.uniform(0.0, 2.0 * np.pi, n)
    b = rng.uniform(0.0, 2.0 * np.pi, n)
    r2 = math.sqrt(1.0 - rho * rho)
    return np.stack([rho * np.cos(a), rho * np.sin(a), r2 * np.cos(b), r2 * np.sin(b)], axis=1)


def clifford_nh_check(rho, n=256):
    """max | |N_h| - 1 | over sampled points of T_rho (verticality)."""
    m = space_form("sphere3")
    p = clifford_points(rho, n)
    r2 = math.sqrt(1.0 - rho * rho)
    ca, sa = p[:, 0] / rho, p[:, 1] / rho
    cb, sb = p[:, 2] / r2, p[:, 3] / r2
    normal = np.stack([-r2 * ca, -r2 * sa, rho * cb, rho * sb], axis=1)
    _, _, T = m.frame_b(p)
    nt = m.inner_b(p, normal, T)
    nh = np.sqrt(1.0 - nt ** 2)
    return float(np.abs(nh - 1.0).max())


def clifford_profile(rho) -> IsoProfilePoint:
    """Closed-form (area, volume) record of the vertical torus in RP^3;
    volume is the rho-side domain pi^2 rho^2."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return IsoProfilePoint("clifford", float(rho), clifford_area_closed(rho),
                           math.pi ** 2 * rho * rho, "projective3")


def projection_injective(verts, tol=1e-6):
    """True when the mesh has no antipodal vertex pairs, so the projection
    S^3 -> RP^3 is injective on it."""
    d = cKDTree(verts).query(-verts)[0]
    return bool(d.min() > tol)


def compare_rp3(lam_grid, n_samples=200_000, seed=DEFAULT_SEED,
                n_directions=128, n_s=64):
    """Example 6.1 comparison: per lam, the Pansu sphere vs the Clifford
    torus of the same (RP^3) volume.  Returns (rows, crossover_interval)."""
    rows = []
    for lam in lam_grid:
        if lam <= 0.0:
            raise ValueError("RP^3 comparison needs lam > 0")
        sphere = build_pansu(space_form("sphere3"), lam,
                             n_directions=n_directions, n_s=n_s)
        a_closed = pansu_area_closed(lam)
        a_num = sphere.area()
        v_ode = volume_ode(lam)
        v_mc, _ = mc_enclosed_volume(sphere, n_samples=n_samples, seed=seed)
        vol = v_mc if abs(v_mc - v_ode) > 0.02 * max(v_mc, 1e-12) else v_ode
        if vol > VOL_RP3:
            raise ValueError("matched volume exceeds vol(RP^3)")
        rho = math.sqrt(vol / VOL_RP3)
        a_cl = clifford_area_closed(rho)
        rows.append({
            "lambda": float(lam),
            "a_pansu_closed": a_closed,
            "a_pansu_numeric": a_num,
            "v_ode": v_ode,
            "v_mc": v_mc,
            "rho_matched": rho,
            "a_clifford": a_cl,
            "winner": "clifford" if a_cl < a_closed else "pansu",
        })
    wins = [r["lambda"] for r in rows if r["winner"] == "clifford"]
    interval = (min(wins), max(wins)) if wins else None
    return rows, interval


def comparison_csv_rows(rows):
    header = "lambda,A_pansu_closed,A_pansu_numeric,V_ode,V_mc,rho_matched,A_clifford,winner"
    lines = [header]
    for r in rows:
        lines.append(",".join([
            f"{r['lambda']:.12g}", f"{r['a_pansu_closed']:.12g}",
            f"{r['a_pansu_numeric']:.12g}", f"{r['v_ode']:.12g}",
            f"{r['v_mc']:.12g}", f"{r['rho_matched']:.12g}",
            f"{r['a_clifford']:.12g}", r["winner"],
        ]))
    return lines
