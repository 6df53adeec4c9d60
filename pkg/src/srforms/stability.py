"""Stability quadratic form Q(u), instability test functions and verdicts.

For a C^1 function u on an assembly that is vertical near the singular set,

    Q(u) = int_Sigma |N_h|^{-1} (Z(u)^2 - q u^2) da
         + int_Lambda (S(u)^2 - 4 u^2) dl,

with q = |B(Z)+S|^2 + 4 (K-1) |N_h|^2.  If the surface is stable then
Q(u) >= 0, so a negative value certifies instability.

The test functions w_sigma are separable, w = phi(eps) psi(s) per band,
with psi built from <N,T>: then |N_h|^{-1} Z(w)^2 extends continuously to
the singular curves because Z(<N,T>) = |N_h| (<B(Z),S> - 1).  All surface
integrals factor into 1-d quadratures of the s-only profile

    I(s) = (|N_h| (<B(Z),S> - 1)^2 - |N_h|^{-1} q <N,T>^2) j,

whose antiderivative is the closed-form bracket <N,T>(<B(Z),S> - 1) j
(the length of the level curve Gamma_s is ell j sqrt(1 + lam^2 |N_h|^2),
and the sqrt cancels against the same factor in the denominator of the
band formula).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geodesic import CCGeodesic
from .quadrature import adaptive_simpson
from .ruled import RuledPatch, SurfaceAssembly, patch_mesh, ray_states, scalar_fields

__all__ = [
    "PhiProfile",
    "TestFunction",
    "StabilityReport",
    "q_profile",
    "constant_C",
    "aux_band_value",
    "band_value_direct",
    "make_test_function",
    "evaluate_Q",
    "q_limit",
    "instability_verdict",
    "register_shift",
    "second_variation_vertical",
]

SQRT2_PI = math.sqrt(2.0) * math.pi


@dataclass(frozen=True)
class PhiProfile:
    """Mean-zero eps-profile: a sine mode on a circle of length ell, or a
    one-period sine bump supported on [alpha, alpha + ell]."""

    kind: str  # "sine" | "bump"
    ell: float
    k: int = 1
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sine", "bump"):
            raise ValueError("kind must be 'sine' or 'bump'")
        if self.ell <= 0.0 or self.k < 1:
            raise ValueError("need ell > 0 and k >= 1")

    def phi(self, e):
        e = np.asarray(e, dtype=float)
        x = 2.0 * np.pi * self.k * (e - self.alpha) / self.ell
        out = np.sin(x)
        if self.kind == "bump":
            inside = (e >= self.alpha) & (e <= self.alpha + self.ell)
            out = np.where(inside, out, 0.0)
        return out

    def dphi(self, e):
        e = np.asarray(e, dtype=float)
        om = 2.0 * np.pi * self.k / self.ell
        out = om * np.cos(om * (e - self.alpha))
        if self.kind == "bump":
            inside = (e >= self.alpha) & (e <= self.alpha + self.ell)
            out = np.where(inside, out, 0.0)
        return out

    @property
    def int_phi2(self):
        return 0.5 * self.ell

    @property
    def int_dphi2(self):
        return 0.5 * self.ell * (2.0 * np.pi * self.k / self.ell) ** 2


def _sf(patch: RuledPatch, s):
    return {k: float(np.asarray(v)) for k, v in scalar_fields(patch, float(s)).items()}


def q_profile(patch: RuledPatch):
    """s -> |N_h|^{-1} q, continuous on [0, s_cut] (endpoint limits 0)."""

    def f(s):
        return _sf(patch, s)["q_over_nh"]

    return f


def _q_j(patch):
    def f(s):
        d = _sf(patch, s)
        return d["q_over_nh"] * d["area_density"]

    return f


def _profile_I(patch):
    def f(s):
        d = _sf(patch, s)
        return (d["nh_norm"] * (d["bzs"] - 1.0) ** 2
                - d["q_over_nh"] * d["nt"] ** 2) * d["area_density"]

    return f


def constant_C(assembly: SurfaceAssembly, tol=1e-10):
    """C = int_0^{s2} |N_h|^{-1} q j ds over the Sigma_2 patch."""
    patch = assembly.patches[1][0]
    return adaptive_simpson(_q_j(patch), 0.0, patch.s_cut, tol=tol)


def _bracket(patch, s):
    d = _sf(patch, s)
    return d["nt"] * (d["bzs"] - 1.0) * d["area_density"]


def aux_band_value(patch: RuledPatch, a, b, phi: PhiProfile):
    """Closed form of int_{Sigma_{a,b}} |N_h|^{-1}(Z(w)^2 - q w^2) da for
    w = phi(eps) <N,T>(s): (int phi^2) [ <N,T>(<B(Z),S>-1) j ]_a^b."""
    if not (0.0 <= a <= b <= patch.s_cut):
        raise ValueError("band outside [0, s_cut]")
    return phi.int_phi2 * (_bracket(patch, b) - _bracket(patch, a))


def band_value_direct(patch: RuledPatch, a, b, phi: PhiProfile, tol=1e-9):
    """The same band integral by nested 2-d quadrature (cross-check)."""
    if not (0.0 <= a <= b <= patch.s_cut):
        raise ValueError("band outside [0, s_cut]")
    prof = _profile_I(patch)

    def outer(e):
        p = float(phi.phi(e))
        if p == 0.0:
            return 0.0
        return p * p * adaptive_simpson(prof, a, b, tol=tol)

    # split at the quarter periods of phi: the dyadic Simpson nodes of the
    # whole interval can all be zeros of phi, which stalls the refinement
    k = getattr(phi, "k", 1) or 1
    cuts = phi.alpha + phi.ell * np.arange(4 * k + 1) / (4 * k)
    return sum(adaptive_simpson(outer, lo, hi, tol=tol / (4 * k))
               for lo, hi in zip(cuts[:-1], cuts[1:]))


def register_shift(c1: CCGeodesic, c2: CCGeodesic, ell, n_coarse=256, n_pts=32):
    """eps0 with Gamma_2(eps) = Gamma_1(eps + eps0), by coarse scan plus
    golden-section refinement of the mean squared distance."""
    m1 = int(round(ell / c1.step))
    m2 = int(round(ell / c2.step))
    idx2 = (np.arange(n_pts) * m2) // n_pts
    P2 = c2.points[idx2]
    proj = c1.model.kind == "projective3"

    def cost(e0):
        d = 0.0
        for k in range(n_pts):
            e = (k * ell / n_pts + e0) % ell
            j = int(round(e / c1.step)) % m1
            p1 = c1.points[j]
            dd = np.sum((P2[k] - p1) ** 2)
            if proj:
                dd = min(dd, np.sum((P2[k] + p1) ** 2))
            d += dd
        return d / n_pts

    grid = np.arange(n_coarse) * ell / n_coarse
    vals = [cost(e) for e in grid]
    k0 = int(np.argmin(vals))
    lo = grid[k0] - ell / n_coarse
    hi = grid[k0] + ell / n_coarse
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
    f1, f2 = cost(x1), cost(x2)
    for _ in range(60):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = cost(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = cost(x2)
        if hi - lo < 1e-10:
            break
    return 0.5 * (lo + hi) % ell


@dataclass(frozen=True)
class TestFunction:
    """The proof's w_sigma on an assembly, separable per band."""

    assembly: SurfaceAssembly
    phi: PhiProfile
    sigma: float
    case: str  # "closed" | "open"
    eps0: float | None = None

    def nt_sigma(self):
        p1 = self.assembly.patches[0][0]
        return _sf(p1, self.sigma)["nt"]

    def value(self, patch_index, eps, s):
        """w_sigma at patch coordinates (eps, s)."""
        asm = self.assembly
        p1 = asm.patches[0][0]
        s1 = p1.s_cut
        ntsig = self.nt_sigma()
        ph = float(self.phi.phi(eps))
        if patch_index == 0:
            if s <= self.sigma:
                return ph * ntsig
            if self.case == "open":
                if s <= 0.5 * s1:
                    return ph * _sf(p1, s)["nt"]
                return 0.0
            if s <= 0.5 * s1:
                return ph * _sf(p1, s)["nt"]
            ph2 = float(self.phi.phi((eps - self.eps0) % self.phi.ell))
            if s <= s1 - self.sigma:
                return -ph2 * _sf(p1, s)["nt"]
            return ph2 * ntsig
        if patch_index == 1:
            return ph * ntsig  # constant along the rays of Sigma_2
        if self.case == "open" and patch_index == 2:
            p3 = asm.patches[2][0]
            if s <= self.sigma:
                return ph * ntsig
            if s <= 0.5 * p3.s_cut:
                return ph * _sf(p3, s)["nt"]
            return 0.0
        return 0.0

    def mean_residual(self, n_eps=64, n_s=96):
        """int w_sigma da over the support (should vanish: int phi = 0)."""
        total = 0.0
        n_patches = 3 if self.case == "open" else 2
        for pi in range(min(n_patches, len(self.assembly.patches))):
            patch = self.assembly.patches[pi][0]
            es = patch.eps_grid(n_eps)
            de = patch.eps_measure() / n_eps if patch.eps_domain[0] == "circle" else (
                patch.eps_measure() / (n_eps - 1))
            ss = np.linspace(0.0, patch.s_cut, n_s)
            js = scalar_fields(patch, ss)["area_density"]
            for e in es:
                w = np.array([self.value(pi, e, s) for s in ss])
                total += de * np.trapezoid(w * js, ss)
        return total


def make_test_function(assembly: SurfaceAssembly, phi: PhiProfile, sigma) -> TestFunction:
    s_min = min(assembly.s1, assembly.s2)
    if not 0.0 < sigma < 0.5 * s_min:
        raise ValueError("sigma must lie in (0, min(s1, s2)/2)")
    if assembly.closed:
        c1 = assembly.singular_curves[0][0]
        # the two patch edges trace the same circle; register the shift
        from .ruled import singular_curve

        c2 = singular_curve(assembly.patches[1][0], check=False)
        eps0 = register_shift(c1, c2, phi.ell)
        return TestFunction(assembly, phi, float(sigma), "closed", eps0)
    if phi.kind != "bump" and assembly.closure.kind == "injective":
        raise ValueError("open assemblies need a compactly supported profile")
    if len(assembly.patches) < 3:
        raise ValueError("open case needs the continuation patch Sigma_3")
    return TestFunction(assembly, phi, float(sigma), "open")


def evaluate_Q(assembly: SurfaceAssembly, tf: TestFunction, tol=1e-10):
    """Q(w_sigma), factorized into 1-d quadratures.

    Surface term: profile bands integrate I(s); cap bands (w constant in s)
    contribute -<N,T>(sigma)^2 int q_over_nh j; Sigma_2 contributes the
    full -<N,T>(sigma)^2 C.  Line term: each singular curve meeting the
    support with nonzero w contributes <N,T>(sigma)^2 (int phi'^2-4 phi^2).
    """
    p1 = assembly.patches[0][0]
    s1 = p1.s_cut
    sig = tf.sigma
    nts = tf.nt_sigma()
    ip2, idp2 = tf.phi.int_phi2, tf.phi.int_dphi2
    prof = _profile_I(p1)
    qj = _q_j(p1)
    C = constant_C(assembly, tol=tol)
    cap = adaptive_simpson(qj, 0.0, sig, tol=tol)
    if tf.case == "closed":
        mid = adaptive_simpson(prof, sig, s1 - sig, tol=tol)
        cap2 = adaptive_simpson(qj, s1 - sig, s1, tol=tol)
        surface = ip2 * (mid - nts * nts * (cap + cap2 + C))
        n_lines = 2  # Gamma and Gamma_1 = Gamma_2
    else:
        mid = adaptive_simpson(prof, sig, 0.5 * s1, tol=tol)
        p3 = assembly.patches[2][0]
        mid3 = adaptive_simpson(_profile_I(p3), sig, 0.5 * p3.s_cut, tol=tol)
        cap3 = adaptive_simpson(_q_j(p3), 0.0, sig, tol=tol)
        surface = ip2 * (mid + mid3 - nts * nts * (cap + cap3 + C))
        n_lines = 2  # Gamma and Gamma_2 (w = 0 along Gamma_1 and beyond)
    line = n_lines * nts * nts * (idp2 - 4.0 * ip2)
    return surface + line


def q_limit(assembly: SurfaceAssembly, phi: PhiProfile, C=None, tol=1e-10):
    """lim_{sigma->0} Q(w_sigma) = 2 int phi'^2 - (C + 4) int phi^2;
    for the fundamental circle mode this is 4 pi^2/ell - (C+4) ell/2."""
    if C is None:
        C = constant_C(assembly, tol=tol)
    general = 2.0 * phi.int_dphi2 - (C + 4.0) * phi.int_phi2
    if phi.k == 1:
        circle = 4.0 * np.pi ** 2 / phi.ell - (C + 4.0) * phi.ell / 2.0
        if abs(circle - general) > 1e-9 * max(1.0, abs(general)):
            raise AssertionError("circle formula disagrees with the general value")
    return general


@dataclass
class StabilityReport:
    C: float
    Q_sigma: list
    Q_limit: float
    wirtinger_bound: float
    ell: float
    ell_source: str  # "closure" | "auto"
    hypothesis_flags: dict
    verdict: str
    eps0: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "c_constant": self.C,
            "q_sigma": [[s, v] for s, v in self.Q_sigma],
            "q_limit": self.Q_limit,
            "wirtinger_bound": self.wirtinger_bound,
            "ell": self.ell,
            "ell_source": self.ell_source,
            "hypothesis_flags": self.hypothesis_flags,
            "verdict": self.verdict,
            "eps0": self.eps0,
            "notes": self.notes,
        }


def instability_verdict(assembly: SurfaceAssembly, phi=None,
                        sigma_fractions=(0.2, 0.1, 0.05, 0.025)) -> StabilityReport:
    """Apply the one-sided instability criterion.

    unstable_certified requires lam^2 + kappa >= 1, a generator that is
    injective or a circle longer than sqrt(2) pi, a negative sigma -> 0
    limit, and a negative Q(w_sigma) at the smallest computed sigma.
    There is no "stable" verdict; everything else is inconclusive.
    """
    if assembly.embedded is None:
        from .ruled import embeddedness_diagnostics

        report = embeddedness_diagnostics(assembly)
        assembly.embedded = report["embedded"]
        assembly.notes.append(report)
    if not assembly.embedded:
        raise ValueError("instability criterion requires an embedded assembly")
    notes = []
    if assembly.closure.is_circle:
        ell = assembly.closure.length
        ell_source = "closure"
        injective = False
    else:
        injective = True
        ell = 2.0 * np.pi
        ell_source = "auto"
    if phi is None:
        if injective:
            phi = PhiProfile("bump", ell)
        else:
            phi = PhiProfile("sine", ell)
    curv_flag = assembly.lam ** 2 + assembly.kappa >= 1.0 - 1e-12
    length_flag = injective or ell > SQRT2_PI
    C = constant_C(assembly)
    ql = q_limit(assembly, phi, C=C)
    s_min = min(assembly.s1, assembly.s2)
    q_sigma = []
    if curv_flag and length_flag:
        for frac in sigma_fractions:
            sig = frac * s_min
            tf = make_test_function(assembly, phi, sig)
            q_sigma.append((sig, evaluate_Q(assembly, tf)))
        eps0 = tf.eps0
    else:
        notes.append("hypotheses not met; finite-sigma values not computed")
        eps0 = None
    verdict = "criterion_inconclusive"
    if curv_flag and length_flag and ql < 0.0 and q_sigma and q_sigma[-1][1] < 0.0:
        verdict = "unstable_certified"
    return StabilityReport(
        C=C,
        Q_sigma=q_sigma,
        Q_limit=ql,
        wirtinger_bound=4.0 * np.pi ** 2 / ell ** 2,
        ell=ell,
        ell_source=ell_source,
        hypothesis_flags={
            "curvature": bool(curv_flag),
            "length": bool(length_flag),
        },
        verdict=verdict,
        eps0=eps0,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# vertical variations of a lambda-neighborhood (second-variation checks)


def _tilde_v(assembly: SurfaceAssembly):
    """v~(s) on [-radius, radius]: side-2 profile for s < 0, side 1 for
    s >= 0; C^2 across 0 with v~'(0) = -2."""
    v1 = assembly.patches[0][0].vj
    v2 = assembly.patches[1][0].vj

    def f(s):
        return v1.v(s) if s >= 0.0 else v2.v(-s)

    return f


def _area_displaced(assembly, rho_d, ell, radius, r, n_eps=512):
    """A(r) = int deps int_{-radius}^{radius} |r rho'(eps) + v~(s)| ds."""
    vt = _tilde_v(assembly)
    eps = (np.arange(n_eps) + 0.5) * ell / n_eps

    def inner(c):
        # split at sign changes of c + v~ before integrating
        f = lambda s: abs(c + vt(s))
        grid = np.linspace(-radius, radius, 33)
        vals = np.array([c + vt(s) for s in grid])
        cuts = [-radius]
        from scipy.optimize import brentq

        for k in range(32):
            if vals[k] == 0.0 or vals[k] * vals[k + 1] < 0.0:
                if vals[k + 1] != 0.0 and vals[k] * vals[k + 1] < 0.0:
                    cuts.append(brentq(lambda s: c + vt(s), grid[k], grid[k + 1]))
        cuts.append(radius)
        return sum(adaptive_simpson(f, a, b, tol=1e-12)
                   for a, b in zip(cuts[:-1], cuts[1:]) if b > a)

    total = 0.0
    for e in eps:
        total += inner(r * rho_d(e))
    return total * ell / n_eps


def _volume_swept(assembly, rho, ell, radius, r, n_eps=128, n_s=65):
    """Signed volume between the neighborhood and its vertical displacement
    exp(r rho T), sphere3 only: the theta-Jacobian det(F, F_eps, F_s, iF)
    is theta-independent because left translations are isometries."""
    m = assembly.model
    if m.kind == "heisenberg":
        raise ValueError("swept volume implemented for the spherical models")
    p1 = assembly.patches[0][0]
    p2 = assembly.patches[1][0]
    eps = (np.arange(n_eps) + 0.5) * ell / n_eps
    svals = np.linspace(0.0, radius, n_s)
    total = 0.0
    for patch in (p1, p2):
        vj = patch.vj
        for e in eps:
            P, V = ray_states(patch, e, svals)
            _, _, T = m.frame_b(P)
            J = m.jrot_b(P, V)
            v = vj.v(svals)
            dv = vj.dv(svals)
            X = (-patch.lam * v)[:, None] * V + 0.5 * dv[:, None] * J + v[:, None] * T
            iP = np.stack([-P[:, 1], P[:, 0], -P[:, 3], P[:, 2]], axis=1)
            dets = np.linalg.det(np.stack([P, X, V, iP], axis=1))
            total += np.trapezoid(dets, svals) * float(rho(e))
    return r * total * ell / n_eps


def second_variation_vertical(assembly: SurfaceAssembly, rho: PhiProfile, radius,
                              h=1e-2, n_eps=512):
    """Numeric A''(0) of the vertical variation rho against the closed form
    int rho'^2, plus the volume second difference (expected ~ 0).

    Richardson on central second differences at steps h and h/2.
    """
    s_min = min(assembly.s1, assembly.s2)
    if not 0.0 < radius < s_min:
        raise ValueError("radius must lie in (0, min cut constant)")
    ell = rho.ell

    def A(r):
        return _area_displaced(assembly, rho.dphi, ell, radius, r, n_eps=n_eps)

    a0 = A(0.0)

    def second_diff(step):
        return (A(step) - 2.0 * a0 + A(-step)) / (step * step)

    d1 = second_diff(h)
    d2 = second_diff(0.5 * h)
    a_numeric = (4.0 * d2 - d1) / 3.0
    a_closed = rho.int_dphi2

    if assembly.model.kind == "heisenberg":
        v_second = None  # swept-volume representation implemented on S^3 only
    else:
        def V(r):
            return _volume_swept(assembly, rho.phi, ell, radius, r)

        v0 = V(0.0)
        vd1 = (V(h) - 2.0 * v0 + V(-h)) / (h * h)
        v_second = vd1
    return a_numeric, a_closed, v_second
