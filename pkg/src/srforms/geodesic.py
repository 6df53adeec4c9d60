"""CC-geodesics: shooting, closure detection and CC-Jacobi fields.

A CC-geodesic of curvature lam is a horizontal curve with
gamma'' + 2 lam J(gamma') = 0.  Along it |gamma'| and <gamma', T> are
conserved; the drift of those quantities is the integrator diagnostic.

The vertical component v(s) = <X(s), T> of a CC-Jacobi field X satisfies
v''' + tau v' = 0 with tau = 4 (lam^2 + K); for tau > 0 the closed form is

    v(s) = (a sin(rt s) - b cos(rt s)) / rt + c,    rt = sqrt(tau),

with a = v'(0), b = v''(0)/rt, c = v(0) + v''(0)/tau.  The full field is

    X = {lam (<G', T> - v) + <G', U>} gamma' + (v'/2) J(gamma') + v T,

where G' is the variation vector at s = 0 and U = gamma'(0).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .spaceform import PointRep, SpaceFormModel, TangentRep, space_form

__all__ = [
    "CCGeodesic",
    "VerticalJacobi",
    "shoot",
    "detect_closure",
    "vertical_jacobi",
    "jacobi_vector",
    "jacobi_fd_oracle",
    "Closure",
]

DEFAULT_STEP = 1e-3


def _integrator(model):
    if model.kind == "heisenberg":
        return kernels.rk4_heisenberg
    return kernels.rk4_sphere3  # sphere3 and projective3 share the cover chart


@dataclass(frozen=True)
class CCGeodesic:
    """A sampled CC-geodesic on an arclength grid of spacing ``step``.

    For projective3 the samples live on the covering sphere; closure is
    tested up to the antipodal identification.
    """

    model: SpaceFormModel
    lam: float
    step: float
    s: np.ndarray  # (m,)
    points: np.ndarray  # (m, dim)
    velocities: np.ndarray  # (m, dim)

    @property
    def length(self):
        return float(self.s[-1])

    def state_at(self, s):
        """(point, velocity) at arclength s, re-integrated from the nearest
        stored sample (2 RK4 substeps; local error far below sample error)."""
        if s < 0.0 or s > self.length + 1e-12:
            raise ValueError("arclength outside the integrated range")
        k = min(int(s / self.step), len(self.s) - 1)
        delta = s - self.s[k]
        if delta <= 1e-15:
            return self.points[k].copy(), self.velocities[k].copy()
        P, V = _integrator(self.model)(
            self.points[k][None], self.velocities[k][None], self.lam, delta / 2.0, 2, 2
        )
        return P[0, -1], V[0, -1]

    def speed_drift(self):
        sp = np.linalg.norm(self.velocities, axis=1) if self.model.kind != "heisenberg" else None
        if sp is None:
            g = self.model.metric_b(self.points)
            sp = np.sqrt(np.einsum("ni,nij,nj->n", self.velocities, g, self.velocities))
        return float(np.abs(sp - 1.0).max())

    def vertical_drift(self):
        _, _, T = self.model.frame_b(self.points)
        vert = self.model.inner_b(self.points, self.velocities, T)
        return float(np.abs(vert).max())

    def curvature_estimate(self):
        """-<gamma'', J(gamma')>/2 from fourth-order differences of the
        samples."""
        P, V = self.points, self.velocities
        dV = (-V[4:] + 8.0 * V[3:-1] - 8.0 * V[1:-3] + V[:-4]) / (12.0 * self.step)
        Pm = P[2:-2]
        Vm = V[2:-2]
        if self.model.kind == "heisenberg":
            acc = dV + self.model.gamma_contract_b(Pm, Vm, Vm)
        else:
            acc = dV - np.einsum("ni,ni->n", dV, Pm)[:, None] * Pm
        jv = self.model.jrot_b(Pm, Vm)
        num = -0.5 * self.model.inner_b(Pm, acc, jv)
        den = self.model.inner_b(Pm, jv, jv)
        return num / den

    def to_csv(self):
        """Sample dump with header s,p0,...,v0,... (12 significant digits)."""
        dim = self.points.shape[1]
        buf = io.StringIO()
        cols = ["s"] + [f"p{i}" for i in range(dim)] + [f"v{i}" for i in range(dim)]
        buf.write(",".join(cols) + "\n")
        for k in range(len(self.s)):
            row = [self.s[k], *self.points[k], *self.velocities[k]]
            buf.write(",".join(f"{x:.12g}" for x in row) + "\n")
        return buf.getvalue()


def shoot(model, p: PointRep, w: TangentRep, lam, length, step=DEFAULT_STEP) -> CCGeodesic:
    """Integrate the CC-geodesic from p with horizontal unit direction w."""
    if length <= 0.0 or step <= 0.0:
        raise ValueError("length and step must be positive")
    if step > length:
        raise ValueError("step exceeds the requested length")
    pa, wa = p.array()[None], w.array()[None]
    _, _, T = model.frame_b(pa)
    nrm = np.sqrt(model.inner_b(pa, wa, wa)[0])
    vert = model.inner_b(pa, wa, T)[0]
    if abs(nrm - 1.0) > 1e-8 or abs(vert) > 1e-8:
        raise ValueError("direction must be a horizontal unit vector (tol 1e-8)")
    nsteps = max(1, int(round(length / step)))
    P, V = _integrator(model)(pa, wa, lam, step, nsteps, 1)
    s = step * np.arange(nsteps + 1)
    return CCGeodesic(model, float(lam), float(step), s, P[0], V[0])


@dataclass(frozen=True)
class Closure:
    kind: str  # "circle" | "injective"
    length: float | None = None

    @property
    def is_circle(self):
        return self.kind == "circle"


def _state_gap(g: CCGeodesic, p, v):
    """Distance of a state from the initial state, chart-Euclidean, with the
    antipodal identification on projective3."""
    p0, v0 = g.points[0], g.velocities[0]
    d = np.sqrt(np.sum((p - p0) ** 2) + np.sum((v - v0) ** 2))
    if g.model.kind == "projective3":
        d2 = np.sqrt(np.sum((p + p0) ** 2) + np.sum((v + v0) ** 2))
        return min(d, d2)
    return d


def detect_closure(g: CCGeodesic, tol=1e-6, max_length=None) -> Closure:
    """Decide whether the geodesic closes up (position and velocity return
    simultaneously) before max_length.

    The coarse pass scans the stored samples; a candidate local minimum of
    the state gap is refined by root-finding on the derivative of the
    squared gap, which locates the period to ~1e-9.
    """
    if max_length is None:
        max_length = g.length
    if max_length > g.length + 1e-12:
        raise ValueError("geodesic not integrated up to max_length")
    if tol > g.step:
        raise ValueError("closure tolerance larger than the sample step")

    p0, v0 = g.points[0], g.velocities[0]
    dp = g.points - p0
    dv = g.velocities - v0
    gap = np.sqrt(np.einsum("ni,ni->n", dp, dp) + np.einsum("ni,ni->n", dv, dv))
    if g.model.kind == "projective3":
        sp = g.points + p0
        sv = g.velocities + v0
        gap2 = np.sqrt(np.einsum("ni,ni->n", sp, sp) + np.einsum("ni,ni->n", sv, sv))
        gap = np.minimum(gap, gap2)

    coarse = 10.0 * g.step
    nmax = int(min(max_length / g.step, len(gap) - 1))
    k = 10  # skip the trivial minimum at s = 0
    while k <= nmax:
        if gap[k] < coarse and gap[k] <= gap[k - 1] and (k == nmax or gap[k] <= gap[k + 1]):
            s_lo, s_hi = g.s[k] - g.step, g.s[k] + g.step

            def dgap2(s):
                h = 1e-6
                pa, va = g.state_at(s + h)
                pb, vb = g.state_at(s - h)
                return (_state_gap(g, pa, va) ** 2 - _state_gap(g, pb, vb) ** 2) / (2.0 * h)

            try:
                ell = brentq(dgap2, s_lo, s_hi, xtol=1e-12)
            except ValueError:
                k += 1
                continue
            p, v = g.state_at(ell)
            if _state_gap(g, p, v) < tol:
                return Closure("circle", float(ell))
            k += 2
        k += 1
    return Closure("injective")


@dataclass(frozen=True)
class VerticalJacobi:
    """Closed-form vertical Jacobi component: coefficients of
    v(s) = (a sin(rt s) - b cos(rt s))/rt + c for tau > 0, or the
    polynomial branch for tau = 0."""

    tau: float
    a: float
    b: float
    c: float
    v0: float
    dv0: float
    ddv0: float
    mu: float | None = None

    def v(self, s):
        s = np.asarray(s, dtype=float)
        if self.tau > 0.0:
            rt = np.sqrt(self.tau)
            return (self.a * np.sin(rt * s) - self.b * np.cos(rt * s)) / rt + self.c
        return self.v0 + self.dv0 * s + 0.5 * self.ddv0 * s * s

    def dv(self, s):
        s = np.asarray(s, dtype=float)
        if self.tau > 0.0:
            rt = np.sqrt(self.tau)
            return self.a * np.cos(rt * s) + self.b * np.sin(rt * s)
        return self.dv0 + self.ddv0 * s

    def ddv(self, s):
        s = np.asarray(s, dtype=float)
        if self.tau > 0.0:
            rt = np.sqrt(self.tau)
            return rt * (-self.a * np.sin(rt * s) + self.b * np.cos(rt * s))
        return self.ddv0 * np.ones_like(s)

    def dddv(self, s):
        return -self.tau * self.dv(s)


def vertical_jacobi(tau, v0, dv0, ddv0, mu=None) -> VerticalJacobi:
    """Coefficients of the closed-form solution of v''' + tau v' = 0.

    tau > 0 gives the trigonometric branch; tau = 0 the polynomial one
    (flat model with lam = 0); tau < 0 is not supported.
    """
    if tau < 0.0:
        raise ValueError("tau < 0 is outside the supported regime")
    if tau == 0.0:
        return VerticalJacobi(0.0, 0.0, 0.0, 0.0, v0, dv0, ddv0, mu)
    rt = np.sqrt(tau)
    return VerticalJacobi(float(tau), float(dv0), float(ddv0) / rt, float(v0) + float(ddv0) / tau, float(v0), float(dv0), float(ddv0), mu)


def jacobi_vector(g: CCGeodesic, vj: VerticalJacobi, gdot_T, gdot_U):
    """Sample the CC-Jacobi field X on the grid of g.

    gdot_T = <G', T> and gdot_U = <G', gamma'(0)> are the data of the
    variation curve at s = 0.
    """
    v = vj.v(g.s)
    dv = vj.dv(g.s)
    coef = g.lam * (gdot_T - v) + gdot_U
    J = g.model.jrot_b(g.points, g.velocities)
    _, _, T = g.model.frame_b(g.points)
    return coef[:, None] * g.velocities + 0.5 * dv[:, None] * J + v[:, None] * T


def jacobi_fd_oracle(model, gamma_fn, u_fn, lam, s_grid, eps, step=DEFAULT_STEP):
    """Finite-difference Jacobi field of the pencil F(e, s).

    gamma_fn(e) and u_fn(e) give the base point and the unit horizontal
    shooting direction of the geodesic at pencil parameter e; the oracle is
    the central difference (F(eps, s) - F(-eps, s)) / (2 eps) on s_grid.
    s_grid must be uniform; the integrator step divides its spacing.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if len(s_grid) < 2:
        raise ValueError("need at least two s values")
    ds = s_grid[1] - s_grid[0]
    if not np.allclose(np.diff(s_grid), ds, rtol=0, atol=1e-12):
        raise ValueError("s_grid must be uniform")
    sub = max(1, int(np.ceil(ds / step)))
    if eps < 1e-12:
        raise ValueError("eps below resolution")
    p = np.stack([gamma_fn(+eps), gamma_fn(-eps)])
    w = np.stack([u_fn(+eps), u_fn(-eps)])
    nsteps = (len(s_grid) - 1) * sub
    P, _ = _integrator(model)(p, w, lam, ds / sub, nsteps, sub)
    return (P[0] - P[1]) / (2.0 * eps)
