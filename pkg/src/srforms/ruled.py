"""Ruled CMC patches Sigma_{i,lam}(Gamma), assemblies, Pansu spheres, meshes.

A patch is swept by CC-geodesic rays of curvature lam leaving a horizontal
generator curve Gamma orthogonally: gamma_{i,eps}(0) = Gamma(eps) with
initial direction (-1)^(i-1) J(Gamma'(eps)), i in {1, 2} the two sides.
The vertical Jacobi component v_i(s) of the sweep satisfies
v''' + tau v' = 0, tau = 4 (lam^2 + kappa), with data

    v_i(0) = 0,   v_i'(0) = 2 (-1)^i,   v_i''(0) = 2 h(eps),

where h = <Gamma'', J(Gamma')> is constant -2 mu when Gamma is itself a
CC-geodesic of curvature mu.  All patch fields are rational in (v, v', v''):
with w = sqrt(4 v^2 + v'^2),

    |N_h| = 2 (-1)^i v / w,     <N,T> = (-1)^i v' / w,     j_i = w / 2,
    <B(Z),S> = (2 v v'' + 4 v^2 - v'^2) / w^2,
    |N_h|^{-1} q = 2 (-1)^i v (v'' + 4 v)^2 / w^3 + 4 (lam^2 + K - 1) |N_h|,

the last line being the continuous product form valid up to the singular
edges s = 0 and s = s_i (both summands vanish there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .geodesic import CCGeodesic, Closure, VerticalJacobi, detect_closure, shoot, vertical_jacobi
from .quadrature import adaptive_simpson
from .spaceform import SpaceFormModel, TangentRep

__all__ = [
    "RuledPatch",
    "PatchFields",
    "SurfaceAssembly",
    "PansuSphere",
    "cut_constant",
    "patch_from_geodesic",
    "fields_at",
    "scalar_fields",
    "ray_states",
    "conormal",
    "patch_area",
    "singular_curve",
    "assemble_cmc",
    "embeddedness_diagnostics",
    "build_pansu",
    "patch_mesh",
    "mesh_area_sub",
    "mesh_volume_heisenberg",
    "euler_characteristic",
    "export_obj",
    "export_csv4d",
    "weld_vertices",
    "stereographic_project",
]

RAY_STEP = 1e-3
CURVE_EQ_TOL = 1e-5


def _model_kappa(model):
    return 0.0 if model.kind == "heisenberg" else 1.0


def cut_constant(tau, mu, i):
    """First positive zero s_i of v_i.

    Half-angle form: the nontrivial zeros solve tan(rt s / 2) =
    (-1)^i rt / (2 mu), rt = sqrt(tau), on the branch with
    rt s / 2 in (0, pi).
    """
    if tau <= 0.0:
        raise ValueError("cut constant requires tau > 0")
    if i not in (1, 2):
        raise ValueError("side must be 1 or 2")
    rt = math.sqrt(tau)
    half = math.atan2((-1.0) ** i * rt, 2.0 * mu)
    if half <= 0.0:
        half += math.pi
    return 2.0 * half / rt


@dataclass(frozen=True)
class RuledPatch:
    """One-sided ruled patch over a CC-geodesic generator."""

    model: SpaceFormModel
    generator: CCGeodesic
    side: int  # i in {1, 2}
    lam: float  # ray curvature
    mu: float  # generator curvature
    kappa: float
    tau: float
    vj: VerticalJacobi
    s_cut: float  # cut constant s_i
    s_max: float  # truncation (= s_cut for a full patch)
    eps_domain: tuple  # ("interval", a, b) or ("circle", ell)

    @property
    def sign(self):
        return (-1.0) ** self.side

    def eps_measure(self):
        if self.eps_domain[0] == "circle":
            return self.eps_domain[1]
        return self.eps_domain[2] - self.eps_domain[1]

    def eps_grid(self, n):
        if self.eps_domain[0] == "circle":
            return np.linspace(0.0, self.eps_domain[1], n, endpoint=False)
        return np.linspace(self.eps_domain[1], self.eps_domain[2], n)


@dataclass(frozen=True)
class PatchFields:
    nh_norm: float
    nt: float
    bzs: float
    q: float
    q_over_nh: float
    area_density: float
    Z: TangentRep | None = None
    S: TangentRep | None = None


def patch_from_geodesic(gamma: CCGeodesic, side, lam, eps_domain=None, s_max=None) -> RuledPatch:
    """Build Sigma_{side,lam}(gamma) for a CC-geodesic generator."""
    kappa = _model_kappa(gamma.model)
    tau = 4.0 * (lam * lam + kappa)
    if tau <= 0.0:
        raise ValueError("lam^2 + kappa must be positive")
    mu = gamma.lam
    vj = vertical_jacobi(tau, 0.0, 2.0 * (-1.0) ** side, -4.0 * mu, mu=mu)
    s_cut = cut_constant(tau, mu, side)
    if s_max is None:
        s_max = s_cut
    if not 0.0 < s_max <= s_cut + 1e-12:
        raise ValueError("s_max must lie in (0, s_cut]")
    if eps_domain is None:
        eps_domain = ("interval", 0.0, gamma.length)
    return RuledPatch(
        gamma.model, gamma, int(side), float(lam), float(mu), kappa, tau, vj,
        float(s_cut), float(min(s_max, s_cut)), eps_domain,
    )


def scalar_fields(patch: RuledPatch, s):
    """All s-only patch fields, vectorized; continuous up to the edges."""
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-12) or np.any(s > patch.s_cut + 1e-12):
        raise ValueError("s outside [0, s_cut]")
    sgn = patch.sign
    v = patch.vj.v(s)
    dv = patch.vj.dv(s)
    ddv = patch.vj.ddv(s)
    w2 = 4.0 * v * v + dv * dv
    w = np.sqrt(w2)
    nh = 2.0 * sgn * v / w
    nt = sgn * dv / w
    bzs = (2.0 * v * ddv + 4.0 * v * v - dv * dv) / w2
    q_over_nh = 2.0 * sgn * v * (ddv + 4.0 * v) ** 2 / (w2 * w)
    q_over_nh = q_over_nh + 4.0 * (patch.lam ** 2 + patch.kappa - 1.0) * nh
    return {
        "v": v,
        "dv": dv,
        "ddv": ddv,
        "w": w,
        "nh_norm": nh,
        "nt": nt,
        "bzs": bzs,
        "q_over_nh": q_over_nh,
        "q": q_over_nh * nh,
        "area_density": 0.5 * w,
    }


def _ray_start(patch: RuledPatch, eps):
    p, vel = patch.generator.state_at(eps)
    d = (-1.0) ** (patch.side - 1) * patch.model.jrot_b(p[None], vel[None])[0]
    return p, d


def ray_states(patch: RuledPatch, eps, s_values, step=RAY_STEP):
    """Ray point and velocity at (eps, s) for each s in the sorted grid."""
    s_values = np.asarray(s_values, dtype=float)
    p0, d0 = _ray_start(patch, eps)
    if patch.model.kind == "heisenberg":
        integ = kernels.rk4_heisenberg
    else:
        integ = kernels.rk4_sphere3
    pts = np.empty((len(s_values), p0.shape[0]))
    vels = np.empty_like(pts)
    p, v, s_prev = p0, d0, 0.0
    for k, s in enumerate(s_values):
        delta = s - s_prev
        if delta > 1e-14:
            n = max(1, int(math.ceil(delta / step)))
            P, V = integ(p[None], v[None], patch.lam, delta / n, n, n)
            p, v = P[0, -1], V[0, -1]
            s_prev = s
        pts[k], vels[k] = p, v
    return pts, vels


def fields_at(patch: RuledPatch, eps, s, with_vectors=True) -> PatchFields:
    """Patch fields at one (eps, s); edge values are the continuous limits."""
    sc = {k: float(np.asarray(val)) for k, val in scalar_fields(patch, float(s)).items()}
    Z = S = None
    if with_vectors:
        pts, vels = ray_states(patch, eps, [float(s)])
        p, z = pts[0], vels[0]
        m = patch.model
        _, _, T = m.frame_b(p[None])
        jz = m.jrot_b(p[None], z[None])[0]
        # X = -(lam v) Z + (v'/2) J(Z) + v T ; S = (2 (-1)^(i-1)/w) X - lam |N_h| Z
        X = -(patch.lam * sc["v"]) * z + 0.5 * sc["dv"] * jz + sc["v"] * T[0]
        pref = 2.0 * (-1.0) ** (patch.side - 1) / sc["w"]
        Svec = pref * X - patch.lam * sc["nh_norm"] * z
        Z = m.tangent(m.point(p), z)
        S = m.tangent(m.point(p), Svec)
    return PatchFields(sc["nh_norm"], sc["nt"], sc["bzs"], sc["q"], sc["q_over_nh"],
                       sc["area_density"], Z, S)


def conormal(patch: RuledPatch, eps) -> TangentRep:
    """Outer unit conormal along the boundary curve s = s_max of a
    truncated patch: nu = (Z - lam |N_h| S) / sqrt(1 + lam^2 |N_h|^2)."""
    if patch.s_max >= patch.s_cut - 1e-12:
        raise ValueError("conormal undefined on the singular edge s_max = s_cut")
    f = fields_at(patch, eps, patch.s_max)
    z = f.Z.array()
    svec = f.S.array()
    nu = (z - patch.lam * f.nh_norm * svec) / math.sqrt(1.0 + (patch.lam * f.nh_norm) ** 2)
    return patch.model.tangent(f.Z.base, nu)


def patch_area(patch: RuledPatch, eps_range=None, tol=1e-10):
    """Sub-Riemannian area: int |N_h| j_i deps ds = eps_len * int (-1)^i v ds."""
    if eps_range is None:
        eps_len = patch.eps_measure()
    else:
        eps_len = float(eps_range[1]) - float(eps_range[0])
    if eps_len == 0.0:
        return 0.0
    sgn = patch.sign
    return eps_len * adaptive_simpson(lambda s: sgn * patch.vj.v(s), 0.0, patch.s_max, tol=tol)


def _dist_to_polyline(pts, curve_pts):
    """Distance from each point to the sampled curve, projecting onto the
    segments adjacent to the nearest sample (plain nearest-sample distance
    overestimates by ~half the sample spacing)."""
    idx = cKDTree(curve_pts).query(pts)[1]
    best = np.linalg.norm(pts - curve_pts[idx], axis=1)
    n = len(curve_pts)
    for off in (-1, 0):
        a = np.clip(idx + off, 0, n - 2)
        A = curve_pts[a]
        B = curve_pts[a + 1]
        ab = B - A
        den = np.einsum("ni,ni->n", ab, ab)
        t = np.clip(np.einsum("ni,ni->n", pts - A, ab) / np.maximum(den, 1e-300), 0.0, 1.0)
        proj = A + t[:, None] * ab
        best = np.minimum(best, np.linalg.norm(pts - proj, axis=1))
    return best


def _curve_distance(pts, curve: CCGeodesic):
    d = _dist_to_polyline(pts, curve.points)
    if curve.model.kind == "projective3":
        d = np.minimum(d, _dist_to_polyline(pts, -curve.points))
    return d


def singular_curve(patch: RuledPatch, check=True, n_check=17) -> CCGeodesic:
    """The far edge s = s_cut as a CC-geodesic of curvature mu.

    The edge is shot directly from the eps = start state with the edge
    velocity (-1)^(i-1) J(ray velocity); when check is set, a sample of ray
    endpoints is verified to lie on the shot curve.
    """
    m = patch.model
    a = 0.0 if patch.eps_domain[0] == "circle" else patch.eps_domain[1]
    pts, vels = ray_states(patch, a, [patch.s_cut])
    vel = (-1.0) ** (patch.side - 1) * m.jrot_b(pts[0][None], vels[0][None])[0]
    curve = shoot(m, m.point(pts[0]), m.tangent(m.point(pts[0]), vel), patch.mu,
                  patch.generator.length, patch.generator.step)
    if check:
        eps_samples = patch.eps_grid(n_check)
        edge = np.empty((len(eps_samples), pts.shape[1]))
        for k, e in enumerate(eps_samples):
            edge[k] = ray_states(patch, e, [patch.s_cut])[0][0]
        d = _curve_distance(edge, curve)
        if d.max() > 10.0 * CURVE_EQ_TOL:
            raise RuntimeError(f"edge curve deviates from a CC-geodesic by {d.max():.2e}")
    return curve


def curves_equal(c1: CCGeodesic, c2: CCGeodesic, tol=CURVE_EQ_TOL):
    """Hausdorff-style equality of two curves as point sets."""
    d12 = _curve_distance(c1.points, c2)
    d21 = _curve_distance(c2.points, c1)
    return max(d12.max(), d21.max()) < tol


@dataclass
class SurfaceAssembly:
    """C_lam(Gamma): ruled patches of alternating curvature glued along
    singular curves."""

    model: SpaceFormModel
    generator: CCGeodesic
    lam: float
    kappa: float
    mu: float
    closure: Closure
    patches: list  # (RuledPatch, signed lam of its generation)
    singular_curves: list  # (CCGeodesic, normal sign +-1)
    closed: bool
    truncated: bool = False
    embedded: bool | None = None
    notes: list = field(default_factory=list)

    @property
    def ell(self):
        return self.closure.length if self.closure.is_circle else None

    @property
    def s1(self):
        return self.patches[0][0].s_cut

    @property
    def s2(self):
        return self.patches[1][0].s_cut

    def total_area(self):
        return sum(patch_area(p) for p, _ in self.patches)

    def summary(self):
        return {
            "model": self.model.kind,
            "lambda": self.lam,
            "kappa": self.kappa,
            "mu": self.mu,
            "closure": self.closure.kind,
            "ell": self.ell,
            "s1": self.s1,
            "s2": self.s2,
            "closed": self.closed,
            "truncated": self.truncated,
            "embedded": self.embedded,
            "n_patches": len(self.patches),
            "singular_curve_lengths": [c.length for c, _ in self.singular_curves],
            "patch_areas": [patch_area(p) for p, _ in self.patches],
            "total_area": self.total_area(),
        }


def assemble_cmc(gamma: CCGeodesic, lam, max_generations=4, closure=None) -> SurfaceAssembly:
    """Assemble C_lam(Gamma) starting from the CC-geodesic Gamma.

    Generation k attaches patches of curvature (-1)^k lam from the newest
    singular curves; the curve created by a side-i patch continues with
    side 3-i (the side-i continuation retraces the arriving rays).
    """
    kappa = _model_kappa(gamma.model)
    if lam * lam + kappa <= 0.0:
        raise ValueError("lam^2 + kappa must be positive")
    if closure is None:
        closure = detect_closure(gamma)
    if closure.is_circle:
        dom = ("circle", closure.length)
    else:
        dom = ("interval", 0.0, gamma.length)
    p1 = patch_from_geodesic(gamma, 1, lam, eps_domain=dom)
    p2 = patch_from_geodesic(gamma, 2, lam, eps_domain=dom)
    c1 = singular_curve(p1)
    c2 = singular_curve(p2)
    closed = curves_equal(c1, c2)
    patches = [(p1, lam), (p2, lam)]
    curves = [(c1, 1.0)]
    if closed:
        return SurfaceAssembly(gamma.model, gamma, lam, kappa, gamma.lam, closure,
                               patches, curves, True)
    curves.append((c2, 1.0))
    frontier = [(c1, 1), (c2, 2)]  # (curve, side of the patch that created it)
    truncated = False
    for k in range(1, max_generations):
        lam_k = (-1.0) ** k * lam
        nxt = []
        for curve, born_side in frontier:
            side = 3 - born_side
            p = patch_from_geodesic(curve, side, lam_k, eps_domain=dom)
            patches.append((p, lam_k))
            c_new = singular_curve(p)
            if any(curves_equal(c_new, c) for c, _ in curves):
                continue
            curves.append((c_new, (-1.0) ** k))
            nxt.append((c_new, side))
        frontier = nxt
        if not frontier:
            break
    else:
        truncated = True
    return SurfaceAssembly(gamma.model, gamma, lam, kappa, gamma.lam, closure,
                           patches, curves, False, truncated=truncated)


# ---------------------------------------------------------------------------
# meshing


def patch_mesh(patch: RuledPatch, n_eps=128, n_s=64, s_max=None, step=RAY_STEP):
    """Quad-triangulated mesh of the patch on an (eps, s) grid.

    Returns (verts, faces, grid_shape); eps wraps around for circle
    domains.  verts[k * (n_s+1) + j] is the sample at (eps_k, s_j).
    """
    if s_max is None:
        s_max = patch.s_max
    circle = patch.eps_domain[0] == "circle"
    eps = patch.eps_grid(n_eps if circle else n_eps + 1)
    ne = len(eps)
    starts = np.empty((ne, patch.generator.points.shape[1]))
    dirs = np.empty_like(starts)
    for k, e in enumerate(eps):
        starts[k], dirs[k] = _ray_start(patch, e)
    integ = kernels.rk4_heisenberg if patch.model.kind == "heisenberg" else kernels.rk4_sphere3
    sub = max(1, int(math.ceil((s_max / n_s) / step)))
    P, _ = integ(starts, dirs, patch.lam, s_max / (n_s * sub), n_s * sub, sub)
    verts = P.reshape(ne * (n_s + 1), -1)
    faces = []
    for k in range(ne if circle else ne - 1):
        k2 = (k + 1) % ne
        for j in range(n_s):
            a = k * (n_s + 1) + j
            b = k2 * (n_s + 1) + j
            faces.append((a, b, b + 1))
            faces.append((a, b + 1, a + 1))
    return verts, np.asarray(faces, dtype=np.int64), (ne, n_s + 1)


def weld_vertices(verts, faces, tol=1e-6):
    """Merge vertices closer than tol; returns (verts, faces) reindexed."""
    tree = cKDTree(verts)
    parent = np.arange(len(verts))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in tree.query_pairs(tol):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    root = np.array([find(a) for a in range(len(verts))])
    uniq, new_idx = np.unique(root, return_inverse=True)
    new_faces = new_idx[faces]
    keep = (new_faces[:, 0] != new_faces[:, 1]) & (new_faces[:, 1] != new_faces[:, 2]) & (
        new_faces[:, 0] != new_faces[:, 2]
    )
    return verts[uniq], new_faces[keep]


def euler_characteristic(faces):
    faces = np.asarray(faces)
    vs = np.unique(faces)
    edges = set()
    for a, b, c in faces:
        edges.add((min(a, b), max(a, b)))
        edges.add((min(b, c), max(b, c)))
        edges.add((min(a, c), max(a, c)))
    return int(len(vs) - len(edges) + len(faces))


def _tri_normal_sphere(model, verts, faces):
    """Per-face (riemannian area, |N_h|) for a mesh on the unit 3-sphere."""
    A = verts[faces[:, 0]]
    e1 = verts[faces[:, 1]] - A
    e2 = verts[faces[:, 2]] - A
    c = A + (e1 + e2) / 3.0
    c = c / np.linalg.norm(c, axis=1, keepdims=True)
    # project edges to the tangent space at the centroid
    e1t = e1 - np.einsum("ni,ni->n", e1, c)[:, None] * c
    e2t = e2 - np.einsum("ni,ni->n", e2, c)[:, None] * c
    g11 = np.einsum("ni,ni->n", e1t, e1t)
    g22 = np.einsum("ni,ni->n", e2t, e2t)
    g12 = np.einsum("ni,ni->n", e1t, e2t)
    area = 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))
    # unit normal: complement of {c, e1t, e2t} via 4-d generalized cross
    M = np.stack([c, e1t, e2t], axis=1)  # (n, 3, 4)
    n = np.empty_like(c)
    for k in range(4):
        cols = [j for j in range(4) if j != k]
        n[:, k] = (-1.0) ** k * np.linalg.det(M[:, :, cols])
    nrm = np.linalg.norm(n, axis=1)
    nrm[nrm == 0.0] = 1.0
    n = n / nrm[:, None]
    T = np.stack([-c[:, 1], c[:, 0], -c[:, 3], c[:, 2]], axis=1)
    nt = np.einsum("ni,ni->n", n, T)
    nh = np.sqrt(np.maximum(1.0 - nt * nt, 0.0))
    return area, nh


def mesh_area_sub(model, verts, faces):
    """Discrete sub-Riemannian area of a triangle mesh.

    sphere3/projective3: sum of |N_h| times the Riemannian face area.
    heisenberg: the area 2-form sqrt((dx^eta)^2 + (dy^eta)^2) evaluated on
    the edge pair of each face with eta at the first vertex; this is exactly
    covariant under the dilations (x,y,t) -> (e^r x, e^r y, e^{2r} t).
    """
    faces = np.asarray(faces, dtype=np.int64)
    if model.kind == "heisenberg":
        A = verts[faces[:, 0]]
        e1 = verts[faces[:, 1]] - A
        e2 = verts[faces[:, 2]] - A
        # eta(v) = v_t + x v_y - y v_x at the base vertex
        eta1 = e1[:, 2] + A[:, 0] * e1[:, 1] - A[:, 1] * e1[:, 0]
        eta2 = e2[:, 2] + A[:, 0] * e2[:, 1] - A[:, 1] * e2[:, 0]
        p13 = e1[:, 0] * eta2 - e2[:, 0] * eta1  # (dx ^ eta)(e1, e2)
        p23 = e1[:, 1] * eta2 - e2[:, 1] * eta1  # (dy ^ eta)(e1, e2)
        return float(0.5 * np.sqrt(p13 * p13 + p23 * p23).sum())
    area, nh = _tri_normal_sphere(model, verts, faces)
    return float((area * nh).sum())


def mesh_volume_heisenberg(verts, faces):
    """Enclosed volume of a closed mesh: sum of signed origin tetrahedra.

    The chart volume form is dx dy dt (unit metric determinant), so the
    Euclidean value is the Riemannian one; it scales exactly by e^{4r}
    under the dilations.
    """
    faces = np.asarray(faces, dtype=np.int64)
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    vol = np.einsum("ni,ni->n", a, np.cross(b, c)).sum() / 6.0
    return float(abs(vol))


def export_obj(verts, faces, path, header_lines=()):
    """Wavefront OBJ with 9-significant-digit vertices."""
    if verts.shape[1] != 3:
        raise ValueError("OBJ export needs 3-d vertices")
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for v in verts:
            fh.write("v " + " ".join(f"{x:.9g}" for x in v) + "\n")
        for f in np.asarray(faces) + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def export_csv4d(verts, faces, path, header_lines=()):
    """CSV fallback for 4-d meshes: vertex rows then face rows."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("kind,a,b,c,d\n")
        for v in verts:
            fh.write("v," + ",".join(f"{x:.9g}" for x in v) + "\n")
        for f in np.asarray(faces):
            fh.write(f"f,{f[0]},{f[1]},{f[2]},\n")


def stereographic_project(verts, pole=None):
    """S^3 -> R^3 from the pole (default: the candidate point on S^3
    farthest from the mesh, out of 256 fixed-seed random draws)."""
    verts = np.asarray(verts, dtype=float)
    if pole is None:
        rng = np.random.default_rng(12345)
        cand = rng.normal(size=(256, 4))
        cand = cand / np.linalg.norm(cand, axis=1, keepdims=True)
        pole = cand[int(np.argmax(cKDTree(verts).query(cand)[0]))]
    pole = np.asarray(pole, dtype=float)
    den = 1.0 - verts @ pole
    if np.any(np.abs(den) < 1e-9):
        raise ValueError("mesh touches the projection pole")
    # orthonormal basis of pole^perp
    B = np.linalg.svd(pole[None])[2][1:]
    return (verts @ B.T) / den[:, None]


# ---------------------------------------------------------------------------
# embeddedness diagnostics


def _tri_tri_intersect(t1, t2, eps=1e-12):
    """Segment of intersection of two 3-d triangles, or None (Moller)."""

    def plane(t):
        n = np.cross(t[1] - t[0], t[2] - t[0])
        return n, -np.dot(n, t[0])

    n1, d1 = plane(t1)
    n2, d2 = plane(t2)
    s2 = t2 @ n1 + d1
    if np.all(s2 > eps) or np.all(s2 < -eps):
        return None
    s1 = t1 @ n2 + d2
    if np.all(s1 > eps) or np.all(s1 < -eps):
        return None
    d = np.cross(n1, n2)
    ax = np.argmax(np.abs(d))
    if np.abs(d[ax]) < eps:
        return None  # near-coplanar: ignored (handled by the contact band)

    def interval(t, s):
        pr = t[:, ax]
        pts = []
        for i in range(3):
            j = (i + 1) % 3
            if s[i] * s[j] < 0.0 or (abs(s[i]) <= eps) != (abs(s[j]) <= eps):
                if abs(s[i] - s[j]) < eps:
                    continue
                w = s[i] / (s[i] - s[j])
                pts.append((pr[i] + w * (pr[j] - pr[i]), t[i] + w * (t[j] - t[i])))
            elif abs(s[i]) <= eps:
                pts.append((pr[i], t[i]))
        if len(pts) < 2:
            return None
        pts.sort(key=lambda z: z[0])
        return pts[0], pts[-1]

    i1 = interval(t1, s1)
    i2 = interval(t2, s2)
    if i1 is None or i2 is None:
        return None
    lo = max(i1[0][0], i2[0][0])
    hi = min(i1[1][0], i2[1][0])
    if lo > hi + eps:
        return None

    def lerp(iv, x):
        (xa, pa), (xb, pb) = iv
        if abs(xb - xa) < eps:
            return pa
        w = (x - xa) / (xb - xa)
        return pa + w * (pb - pa)

    return lerp(i1, lo), lerp(i1, hi)


def _mesh_intersections(v1, f1, v2, f2, cell=None):
    """Midpoints of triangle-triangle intersection segments (3-d meshes)."""
    if cell is None:
        e = v1[f1[:, 1]] - v1[f1[:, 0]]
        cell = 2.0 * float(np.linalg.norm(e, axis=1).mean())
    c1 = (v1[f1[:, 0]] + v1[f1[:, 1]] + v1[f1[:, 2]]) / 3.0
    c2 = (v2[f2[:, 0]] + v2[f2[:, 1]] + v2[f2[:, 2]]) / 3.0
    grid = {}
    for idx, c in enumerate(c2):
        key = tuple((c // cell).astype(np.int64))
        grid.setdefault(key, []).append(idx)
    pts = []
    for i, c in enumerate(c1):
        base = (c // cell).astype(np.int64)
        t1 = v1[f1[i]]
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for j in grid.get((base[0] + dx, base[1] + dy, base[2] + dz), ()):
                        seg = _tri_tri_intersect(t1, v2[f2[j]])
                        if seg is not None:
                            pts.append(0.5 * (seg[0] + seg[1]))
    return np.asarray(pts) if pts else np.empty((0, 3))


def embeddedness_diagnostics(assembly: SurfaceAssembly, n_eps=96, n_s=48):
    """Three checks: singular-curve coherence, the monotonicity identity of
    the injectivity argument, and a mesh self-intersection scan.

    The identity a^2 v^2 (v'/v)' / 4 = b (a sin as + b cos as) - (a^2+b^2)
    with a = sqrt(tau), b = -2 mu makes v'/v strictly decreasing, which is
    what forbids interior ray crossings.
    """
    report = {"checks": [], "embedded": True}

    closures = [detect_closure(c, tol=1e-5) for c, _ in assembly.singular_curves]
    kinds = {c.kind for c in closures}
    lens = [c.length for c in closures if c.is_circle]
    same = len(kinds) == 1 and (not lens or (max(lens) - min(lens) < 1e-5))
    report["checks"].append({
        "name": "singular_curves_coherent",
        "passed": bool(same),
        "kinds": sorted(kinds),
        "lengths": lens,
    })
    if not same:
        report["embedded"] = False

    patch = assembly.patches[0][0]
    a = math.sqrt(patch.tau)
    b = -2.0 * patch.mu
    s = np.linspace(1e-4, patch.s_cut - 1e-4, 400)
    v = patch.vj.v(s)
    dv = patch.vj.dv(s)
    ddv = patch.vj.ddv(s)
    # multiplied through by v^2: a^2 (v'' v - v'^2) / 4 = rhs
    lhs = a * a * (ddv * v - dv * dv) / 4.0
    rhs = b * (a * np.sin(a * s) + b * np.cos(a * s)) - (a * a + b * b)
    resid = float(np.abs(lhs - rhs).max())
    report["checks"].append({
        "name": "monotonicity_identity",
        "passed": bool(resid < 1e-9 * max(1.0, a * a + b * b)),
        "residual": resid,
    })

    v1, f1, _ = patch_mesh(assembly.patches[0][0], n_eps, n_s)
    v2, f2, _ = patch_mesh(assembly.patches[1][0], n_eps, n_s)
    if assembly.model.kind != "heisenberg":
        # project from a pole well clear of the meshes (topology-preserving)
        allv = np.vstack([v1, v2])
        rng = np.random.default_rng(12345)
        cand = rng.normal(size=(256, 4))
        cand = cand / np.linalg.norm(cand, axis=1, keepdims=True)
        dist = cKDTree(allv).query(cand)[0]
        far = cand[int(np.argmax(dist))]
        w1 = stereographic_project(v1, far)
        w2 = stereographic_project(v2, far)
    else:
        w1, w2 = v1, v2
    pts = _mesh_intersections(w1, f1, w2, f2)
    # map intersection points back to ambient distance via nearest mesh vertex
    off_singular = 0
    if len(pts):
        near1 = cKDTree(w1).query(pts)[1]
        amb = v1[near1]
        sing = np.vstack([c.points for c, _ in assembly.singular_curves])
        gen = assembly.generator.points
        ref = np.vstack([sing, gen])
        dmin = cKDTree(ref).query(amb)[0]
        if assembly.model.kind == "projective3":
            dmin = np.minimum(dmin, cKDTree(-ref).query(amb)[0])
        edge = float(np.linalg.norm(v1[f1[0, 1]] - v1[f1[0, 0]]))
        off_singular = int((dmin > 5.0 * max(edge, 1e-3)).sum())
    report["checks"].append({
        "name": "mesh_intersections_within_singular_set",
        "passed": bool(off_singular == 0),
        "n_intersection_samples": int(len(pts)),
        "n_off_singular": off_singular,
    })
    if off_singular:
        report["embedded"] = False
    return report


# ---------------------------------------------------------------------------
# Pansu spheres


@dataclass(frozen=True)
class PansuSphere:
    model: SpaceFormModel
    lam: float
    pole: np.ndarray
    focal_length: float
    verts: np.ndarray
    faces: np.ndarray
    grid_shape: tuple

    def area(self):
        return mesh_area_sub(self.model, self.verts, self.faces)


def _pencil(model, lam, pole, n_dir):
    pole = np.asarray(pole, dtype=float)
    X1, X2, _ = model.frame_b(pole[None])
    th = 2.0 * np.pi * np.arange(n_dir) / n_dir
    dirs = np.cos(th)[:, None] * X1 + np.sin(th)[:, None] * X2
    starts = np.repeat(pole[None], n_dir, axis=0)
    return starts, dirs


def build_pansu(model, lam, pole=None, n_directions=128, n_s=64, step=RAY_STEP) -> PansuSphere:
    """Pansu sphere S_lam as the pencil of all CC-geodesics of curvature
    lam from the pole; the focal length is located by golden-section
    minimization of the pencil spread after a coarse scan."""
    if model.kind == "heisenberg":
        if lam <= 0.0:
            raise ValueError("heisenberg Pansu spheres need lam > 0")
        kappa = 0.0
        if pole is None:
            pole = np.zeros(3)
    else:
        if lam < 0.0:
            raise ValueError("lam must be nonnegative")
        kappa = 1.0
        if pole is None:
            pole = np.array([1.0, 0.0, 0.0, 0.0])
    tau = 4.0 * (lam * lam + kappa)
    horizon = 2.0 * np.pi / math.sqrt(tau)
    starts, dirs = _pencil(model, lam, pole, n_directions)
    integ = kernels.rk4_heisenberg if model.kind == "heisenberg" else kernels.rk4_sphere3
    length = 1.1 * horizon
    nst = int(math.ceil(length / step))
    nrec = 512
    nst = int(math.ceil(nst / nrec)) * nrec
    h = length / nst
    P, _ = integ(starts, dirs, lam, h, nst, nst // nrec)
    spread = P.std(axis=0).sum(axis=1)  # per recorded s, total coordinate std
    kpeak = int(np.argmax(spread))
    kmin = kpeak + int(np.argmin(spread[kpeak:]))
    if kmin >= nrec:
        raise RuntimeError("no focal point found before 2 pi / sqrt(tau) + margin")
    s_grid = np.linspace(0.0, length, nrec + 1)
    lo = s_grid[max(kmin - 1, kpeak)]
    hi = s_grid[min(kmin + 1, nrec)]

    # integrate the pencil once up to the bracket start; probes continue
    # from that cached state
    s_base = lo
    nb = max(2, int(math.ceil(s_base / step)))
    Pb, Vb = integ(starts, dirs, lam, s_base / nb, nb, nb)
    base_p, base_v = Pb[:, -1, :].copy(), Vb[:, -1, :].copy()

    def spread_at(s):
        d = s - s_base
        if d < 1e-14:
            return float(base_p.std(axis=0).sum())
        n = max(1, int(math.ceil(d / step)))
        Ps, _ = integ(base_p, base_v, lam, d / n, n, n)
        return float(Ps[:, -1, :].std(axis=0).sum())
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - gr * (hi - lo)
    x2 = lo + gr * (hi - lo)
    f1, f2 = spread_at(x1), spread_at(x2)
    for _ in range(48):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = spread_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = spread_at(x2)
        if hi - lo < 1e-12:
            break
    focal = 0.5 * (lo + hi)

    sub = max(1, int(math.ceil((focal / n_s) / step)))
    P, _ = integ(starts, dirs, lam, focal / (n_s * sub), n_s * sub, sub)
    verts = P.reshape(n_directions * (n_s + 1), -1)
    faces = []
    for k in range(n_directions):
        k2 = (k + 1) % n_directions
        for j in range(n_s):
            a = k * (n_s + 1) + j
            b = k2 * (n_s + 1) + j
            faces.append((a, b, b + 1))
            faces.append((a, b + 1, a + 1))
    verts, faces = weld_vertices(verts, np.asarray(faces, dtype=np.int64), tol=1e-7)
    return PansuSphere(model, float(lam), np.asarray(pole, dtype=float), float(focal),
                       verts, faces, (n_directions, n_s + 1))
