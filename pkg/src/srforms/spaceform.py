"""Model spaces: the Heisenberg group, the 3-sphere and projective 3-space.

Each model carries a contact structure on a concrete chart:

* ``heisenberg`` -- coordinates (x, y, t), contact form
  eta = dt + x dy - y dx, horizontal frame X1 = d/dx + y d/dt,
  X2 = d/dy - x d/dt, Reeb field T = d/dt.  This is the normalization for
  which the structure identity D_v T = J(v) holds exactly (the residual
  check below rejects the half-scaled variant).  The ambient metric makes
  {X1, X2, T} orthonormal; its determinant is 1, so the Riemannian volume
  is the Lebesgue measure of the chart.
* ``sphere3`` -- unit quaternions in R^4 with the round metric.  The Reeb
  field is T(p) = i*p (left multiplication), the horizontal frame is
  {j*p, k*p}, and the rotation acts by J(v) = i*v on horizontal vectors.
  Left multiplication is the handedness that satisfies D_v T = J(v); the
  residual check below is the arbiter of that convention.
* ``projective3`` -- the quotient of sphere3 by the antipodal map; points
  are canonical representatives and all differential operations delegate
  to the sphere chart.

The flat invariant kappa is 0 for the Heisenberg group and 1 for the two
spherical models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpaceFormModel",
    "PointRep",
    "TangentRep",
    "space_form",
    "frame_at",
    "j_rotate",
    "ambient_acceleration",
    "sasakian_residuals",
    "dilate",
    "project_rp3",
    "webster_curvature",
]

# Finite-difference step used for frame/metric derivatives.
FRAME_FD_STEP = 1e-5
# Outer step for curvature-tensor derivatives (derivatives of Christoffels).
CURV_FD_STEP = 1e-4

_KINDS = ("heisenberg", "sphere3", "projective3")


def _as_array(x, dim):
    a = np.asarray(x, dtype=float)
    if a.shape != (dim,):
        raise ValueError(f"expected a {dim}-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class PointRep:
    """A point of a model space in its chart."""

    kind: str
    coords: tuple

    def array(self):
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class TangentRep:
    """A tangent vector attached to a base point."""

    base: PointRep
    vector: tuple

    def array(self):
        return np.asarray(self.vector, dtype=float)


def quat_mul(a, b):
    """Hamilton product of quaternions stored as (..., 4) arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


_QI = np.array([0.0, 1.0, 0.0, 0.0])
_QJ = np.array([0.0, 0.0, 1.0, 0.0])
_QK = np.array([0.0, 0.0, 0.0, 1.0])


class SpaceFormModel:
    """Base class; concrete charts implement the batched array operations.

    The batched methods (suffix ``_b``) act on arrays of shape (n, dim) and
    are the work horses; the PointRep/TangentRep layer wraps them for the
    public single-point operations.
    """

    kind: str
    kappa: float
    dim: int

    # -- chart-level batched operations -------------------------------

    def frame_b(self, p):
        raise NotImplementedError

    def jrot_b(self, p, v):
        raise NotImplementedError

    def metric_b(self, p):
        raise NotImplementedError

    def inner_b(self, p, u, v):
        g = self.metric_b(p)
        return np.einsum("...i,...ij,...j->...", u, g, v)

    def accel_b(self, p, v, lam):
        raise NotImplementedError

    def validate_point_b(self, p):
        pass

    # -- wrappers ------------------------------------------------------

    def point(self, coords):
        a = _as_array(coords, self.dim)
        self.validate_point_b(a[None])
        return PointRep(self.kind, tuple(a))

    def tangent(self, p: PointRep, vector):
        return TangentRep(p, tuple(_as_array(vector, self.dim)))

    def inner(self, p: PointRep, u: TangentRep, v: TangentRep):
        return float(self.inner_b(p.array()[None], u.array()[None], v.array()[None])[0])

    def norm(self, p, u):
        return float(np.sqrt(max(self.inner(p, u, u), 0.0)))

    def random_points(self, n, rng):
        raise NotImplementedError


class HeisenbergModel(SpaceFormModel):
    kind = "heisenberg"
    kappa = 0.0
    dim = 3

    def frame_b(self, p):
        n = p.shape[0]
        x, y = p[:, 0], p[:, 1]
        X1 = np.zeros((n, 3))
        X1[:, 0] = 1.0
        X1[:, 2] = y
        X2 = np.zeros((n, 3))
        X2[:, 1] = 1.0
        X2[:, 2] = -x
        T = np.zeros((n, 3))
        T[:, 2] = 1.0
        return X1, X2, T

    def eta_b(self, p, v):
        """Contact form dt + x dy - y dx applied to chart vectors."""
        return v[:, 2] + p[:, 0] * v[:, 1] - p[:, 1] * v[:, 0]

    def jrot_b(self, p, v):
        out = np.empty_like(v)
        out[:, 0] = -v[:, 1]
        out[:, 1] = v[:, 0]
        out[:, 2] = -(p[:, 0] * v[:, 0] + p[:, 1] * v[:, 1])
        return out

    def metric_b(self, p):
        x, y = p[:, 0], p[:, 1]
        g = np.empty(p.shape[:1] + (3, 3))
        g[:, 0, 0] = 1.0 + y * y
        g[:, 1, 1] = 1.0 + x * x
        g[:, 2, 2] = 1.0
        g[:, 0, 1] = g[:, 1, 0] = -x * y
        g[:, 0, 2] = g[:, 2, 0] = -y
        g[:, 1, 2] = g[:, 2, 1] = x
        return g

    def _metric_derivs(self, p, h=FRAME_FD_STEP):
        dg = np.empty((3,) + p.shape[:1] + (3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            dg[i] = (self.metric_b(p + e) - self.metric_b(p - e)) / (2.0 * h)
        return dg

    def gamma_contract_b(self, p, u, v):
        """Christoffel contraction Gamma^k_{ij} u^i v^j via metric differences."""
        dg = self._metric_derivs(p)
        # lower index: c_l = 1/2 (u^i v^j) (d_i g_{lj} + d_j g_{li} - d_l g_{ij})
        t1 = np.einsum("inlj,ni,nj->nl", dg, u, v)
        t2 = np.einsum("jnli,ni,nj->nl", dg, u, v)
        t3 = np.einsum("lnij,ni,nj->nl", dg, u, v)
        c = 0.5 * (t1 + t2 - t3)
        return np.linalg.solve(self.metric_b(p), c[..., None])[..., 0]

    def accel_b(self, p, v, lam):
        return -2.0 * lam * self.jrot_b(p, v) - self.gamma_contract_b(p, v, v)

    def covariant_deriv(self, p, v, field_fn, h=FRAME_FD_STEP):
        """D_v W for a chart vector field W(p), by central differencing."""
        dW = (field_fn(p + h * v) - field_fn(p - h * v)) / (2.0 * h)
        return dW + self.gamma_contract_b(p, v, field_fn(p))

    def random_points(self, n, rng):
        return rng.uniform(-2.0, 2.0, size=(n, 3))


class Sphere3Model(SpaceFormModel):
    kind = "sphere3"
    kappa = 1.0
    dim = 4

    def validate_point_b(self, p):
        r = np.linalg.norm(p, axis=-1)
        if np.any(np.abs(r - 1.0) > 1e-12):
            raise ValueError("point not on the unit 3-sphere (norm tolerance 1e-12)")

    def frame_b(self, p):
        T = quat_mul(_QI, p)
        X1 = quat_mul(_QJ, p)
        X2 = quat_mul(_QK, p)
        return X1, X2, T

    def jrot_b(self, p, v):
        # project out the sphere normal and the Reeb direction, then rotate
        T = quat_mul(_QI, p)
        vh = v - np.einsum("ni,ni->n", v, p)[:, None] * p
        vh = vh - np.einsum("ni,ni->n", vh, T)[:, None] * T
        return quat_mul(_QI, vh)

    def metric_b(self, p):
        n = p.shape[0]
        return np.broadcast_to(np.eye(4), (n, 4, 4))

    def inner_b(self, p, u, v):
        return np.einsum("ni,ni->n", u, v)

    def accel_b(self, p, v, lam):
        # gamma'' = -2 lam J(gamma') - |gamma'|^2 gamma keeps |gamma| = 1
        # to integrator order (the normal term is the sphere constraint force)
        sq = np.einsum("ni,ni->n", v, v)[:, None]
        return -2.0 * lam * self.jrot_b(p, v) - sq * p

    def covariant_deriv(self, p, v, field_fn, h=FRAME_FD_STEP):
        def at(q):
            return q / np.linalg.norm(q, axis=-1, keepdims=True)

        Wp = field_fn(at(p + h * v))
        Wm = field_fn(at(p - h * v))
        dW = (Wp - Wm) / (2.0 * h)
        return dW - np.einsum("ni,ni->n", dW, p)[:, None] * p

    def random_points(self, n, rng):
        q = rng.standard_normal((n, 4))
        return q / np.linalg.norm(q, axis=-1, keepdims=True)


class Projective3Model(Sphere3Model):
    """RP^3 as the sphere chart on canonical representatives.

    The projection identifies p with -p; a representative is canonical when
    its first nonzero coordinate is positive.  Differential operations are
    those of the covering sphere.
    """

    kind = "projective3"
    kappa = 1.0

    @staticmethod
    def canonicalize_b(p):
        p = np.array(p, dtype=float)
        n = p.shape[0]
        # walk coordinates, fix the sign at the first nonzero entry
        sign = np.zeros(n)
        for i in range(p.shape[1]):
            live = sign == 0.0
            if not np.any(live):
                break
            col = p[:, i]
            sign[live & (col > 1e-9)] = 1.0
            sign[live & (col < -1e-9)] = -1.0
        sign[sign == 0.0] = 1.0
        return p * sign[:, None]

    def point(self, coords):
        a = _as_array(coords, self.dim)
        self.validate_point_b(a[None])
        a = self.canonicalize_b(a[None])[0]
        return PointRep(self.kind, tuple(a))

    def random_points(self, n, rng):
        return self.canonicalize_b(super().random_points(n, rng))


_MODELS = {
    "heisenberg": HeisenbergModel(),
    "sphere3": Sphere3Model(),
    "projective3": Projective3Model(),
}


def space_form(kind: str) -> SpaceFormModel:
    """Return the (stateless, shared) model instance for a chart kind."""
    try:
        return _MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {_KINDS}")


# ---------------------------------------------------------------------------
# public single-point operations
# ---------------------------------------------------------------------------


def frame_at(model: SpaceFormModel, p: PointRep):
    """Orthonormal frame (X1, X2, T) at p, with X2 = J(X1) and T the Reeb field."""
    a = p.array()[None]
    model.validate_point_b(a)
    X1, X2, T = model.frame_b(a)
    return (
        TangentRep(p, tuple(X1[0])),
        TangentRep(p, tuple(X2[0])),
        TangentRep(p, tuple(T[0])),
    )


def j_rotate(model: SpaceFormModel, v: TangentRep) -> TangentRep:
    """The 90-degree rotation on horizontal vectors, extended by J(T) = 0."""
    p = v.base.array()[None]
    return TangentRep(v.base, tuple(model.jrot_b(p, v.array()[None])[0]))


def ambient_acceleration(model: SpaceFormModel, p: PointRep, v: TangentRep, lam: float) -> TangentRep:
    """Chart-level second derivative realizing gamma'' + 2 lam J(gamma') = 0.

    Requires a horizontal unit vector (tolerance 1e-8).  On sphere3 the
    result contains the -|v|^2 p constraint term; on heisenberg it carries
    the Christoffel correction of the chart.
    """
    pa, va = p.array()[None], v.array()[None]
    _, _, T = model.frame_b(pa)
    nrm = np.sqrt(model.inner_b(pa, va, va)[0])
    vert = model.inner_b(pa, va, T)[0]
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"direction must be unit (|v| = {nrm})")
    if abs(vert) > 1e-8:
        raise ValueError(f"direction must be horizontal (<v,T> = {vert})")
    return TangentRep(p, tuple(model.accel_b(pa, va, lam)[0]))


def sasakian_residuals(model: SpaceFormModel, p: PointRep, v: TangentRep, flip_j: bool = False):
    """Residual magnitudes of the structure identities at (p, v).

    Returns a dict with ``reeb``: |D_v T - J(v)| and ``rotation``: the
    largest residual of D_v(J W) - J(D_v W) - <W,T> v + <v,W> T over the
    frame fields W.  ``flip_j`` negates J, which is the convention detector
    (a wrong handedness shows up as a residual of size about 2|v|).
    """
    pa, va = p.array()[None], v.array()[None]
    sgn = -1.0 if flip_j else 1.0

    def jf(q, w):
        return sgn * model.jrot_b(q, w)

    def t_field(q):
        return model.frame_b(q)[2]

    DT = model.covariant_deriv(pa, va, t_field)
    r_reeb = np.sqrt(model.inner_b(pa, DT - jf(pa, va), DT - jf(pa, va))[0])

    worst = 0.0
    for idx in range(3):
        def w_field(q, idx=idx):
            return model.frame_b(q)[idx if idx < 2 else 2]

        def jw_field(q, idx=idx):
            return jf(q, model.frame_b(q)[idx if idx < 2 else 2])

        W = w_field(pa)
        DJW = model.covariant_deriv(pa, va, jw_field)
        DW = model.covariant_deriv(pa, va, w_field)
        T = t_field(pa)
        res = (
            DJW
            - jf(pa, DW)
            - model.inner_b(pa, W, T)[:, None] * va
            + model.inner_b(pa, va, W)[:, None] * T
        )
        worst = max(worst, float(np.sqrt(model.inner_b(pa, res, res)[0])))
    return {"reeb": float(r_reeb), "rotation": worst}


def dilate(p: PointRep, r: float) -> PointRep:
    """Anisotropic dilation (x, y, t) -> (e^r x, e^r y, e^{2r} t) of the Heisenberg chart."""
    if p.kind != "heisenberg":
        raise ValueError("dilations are only defined on the heisenberg model")
    x, y, t = p.coords
    er = np.exp(r)
    return PointRep("heisenberg", (er * x, er * y, er * er * t))


def project_rp3(p: PointRep) -> PointRep:
    """Quotient projection sphere3 -> projective3 (canonical representative)."""
    if p.kind != "sphere3":
        raise ValueError("project_rp3 expects a sphere3 point")
    return _MODELS["projective3"].point(p.coords)


# ---------------------------------------------------------------------------
# curvature checks (finite differences on the metric)
# ---------------------------------------------------------------------------


def _christoffel(metric_fn, x, h):
    """Gamma^l_{ij} at points x (n, d) for a batched metric function."""
    d = x.shape[1]
    dg = np.empty((d,) + x.shape[:1] + (d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        dg[i] = (metric_fn(x + e) - metric_fn(x - e)) / (2.0 * h)
    # lower symbol: G_{lij} = (d_i g_{lj} + d_j g_{li} - d_l g_{ij}) / 2
    low = 0.5 * (
        np.einsum("inlj->nlij", dg)
        + np.einsum("jnli->nlij", dg)
        - np.einsum("lnij->nlij", dg)
    )
    ginv = np.linalg.inv(metric_fn(x))
    return np.einsum("nkl,nlij->nkij", ginv, low)


def sectional_curvature(metric_fn, x, u, v, h_inner=FRAME_FD_STEP, h_outer=CURV_FD_STEP):
    """Sectional curvature of span{u, v} at points x, metric by finite differences."""
    d = x.shape[1]
    G = _christoffel(metric_fn, x, h_inner)
    dG = np.empty((d,) + G.shape)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h_outer
        dG[i] = (
            _christoffel(metric_fn, x + e, h_inner)
            - _christoffel(metric_fn, x - e, h_inner)
        ) / (2.0 * h_outer)
    # R^l_{kij} = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{im} G^m_{jk} - G^l_{jm} G^m_{ik}
    # contract R(u, v) v with u through the metric
    dG = np.einsum("inljk->nlkij", dG)
    R = (
        dG
        - np.einsum("nlkij->nlkji", dG)
        + np.einsum("nlim,nmjk->nlkij", G, G)
        - np.einsum("nljm,nmik->nlkij", G, G)
    )
    Ruvv = np.einsum("nlkij,nk,ni,nj->nl", R, v, u, v)
    g = metric_fn(x)
    num = np.einsum("nl,nlm,nm->n", Ruvv, g, u)
    uu = np.einsum("ni,nij,nj->n", u, g, u)
    vv = np.einsum("ni,nij,nj->n", v, g, v)
    uv = np.einsum("ni,nij,nj->n", u, g, v)
    return num / (uu * vv - uv * uv)


def _stereo_embed(u):
    """Inverse stereographic chart R^3 -> S^3 (projection pole (-1,0,0,0))."""
    s = np.einsum("ni,ni->n", u, u)
    p = np.empty(u.shape[:1] + (4,))
    p[:, 0] = (1.0 - s) / (1.0 + s)
    p[:, 1:] = 2.0 * u / (1.0 + s)[:, None]
    return p


def _stereo_metric(u):
    s = np.einsum("ni,ni->n", u, u)
    f = (2.0 / (1.0 + s)) ** 2
    return f[:, None, None] * np.broadcast_to(np.eye(3), u.shape[:1] + (3, 3))


def webster_curvature(model: SpaceFormModel, pts):
    """Webster scalar curvature K = (K_h + 3)/4, with K_h the sectional
    curvature of the horizontal plane finite-differenced from the metric.

    ``pts`` is an (n, dim) array of chart points; returns an (n,) array.
    """
    pts = np.asarray(pts, dtype=float)
    if model.kind == "heisenberg":
        X1, X2, _ = model.frame_b(pts)
        kh = sectional_curvature(model.metric_b, pts, X1, X2)
        return (kh + 3.0) / 4.0
    # spherical models: work in the stereographic chart
    p = np.array(pts, dtype=float)
    # keep away from the projection pole; the antipodal flip is an isometry
    flip = p[:, 0] < 0.0
    p[flip] = -p[flip]
    u = p[:, 1:] / (1.0 + p[:, 0])[:, None]
    X1a, X2a, _ = _MODELS["sphere3"].frame_b(p)
    # pull the ambient horizontal frame back through the chart differential
    h = FRAME_FD_STEP
    Jc = np.empty(u.shape[:1] + (4, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        Jc[:, :, i] = (_stereo_embed(u + e) - _stereo_embed(u - e)) / (2.0 * h)
    gram = np.einsum("nki,nkj->nij", Jc, Jc)
    X1c = np.linalg.solve(gram, np.einsum("nki,nk->ni", Jc, X1a)[..., None])[..., 0]
    X2c = np.linalg.solve(gram, np.einsum("nki,nk->ni", Jc, X2a)[..., None])[..., 0]
    kh = sectional_curvature(_stereo_metric, u, X1c, X2c)
    return (kh + 3.0) / 4.0
