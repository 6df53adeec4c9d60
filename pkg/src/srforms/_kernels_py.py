"""Pure-numpy reference implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable.
Both backends implement the same arithmetic in the same order, so their
outputs agree to machine precision; the parity tests assert this.

Kernels:
  rk4_heisenberg / rk4_sphere3 -- fixed-step RK4 integration of the
      curve equation gamma'' + 2 lam J(gamma') = 0 for batches of initial
      conditions, recording every ``record_every``-th step.
  radial_parity -- crossing parity of radial rays {s*u : s > 1} against
      candidate triangle lists (point-in-mesh test in a gnomonic chart).
"""

import numpy as np

_FD = 1e-5  # finite-difference step for the chart Christoffels


def _heis_metric(p):
    x, y = p[:, 0], p[:, 1]
    g = np.empty(p.shape[:1] + (3, 3))
    g[:, 0, 0] = 1.0 + y * y
    g[:, 1, 1] = 1.0 + x * x
    g[:, 2, 2] = 1.0
    g[:, 0, 1] = g[:, 1, 0] = -x * y
    g[:, 0, 2] = g[:, 2, 0] = -y
    g[:, 1, 2] = g[:, 2, 1] = x
    return g


def _heis_accel(p, v, lam):
    dg = np.empty((3,) + p.shape[:1] + (3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = _FD
        dg[i] = (_heis_metric(p + e) - _heis_metric(p - e)) / (2.0 * _FD)
    t1 = np.einsum("inlj,ni,nj->nl", dg, v, v)
    t3 = np.einsum("lnij,ni,nj->nl", dg, v, v)
    c = t1 - 0.5 * t3
    gam = np.linalg.solve(_heis_metric(p), c[..., None])[..., 0]
    jv = np.empty_like(v)
    jv[:, 0] = -v[:, 1]
    jv[:, 1] = v[:, 0]
    jv[:, 2] = -(p[:, 0] * v[:, 0] + p[:, 1] * v[:, 1])
    return -2.0 * lam * jv - gam


def rk4_heisenberg(p0, v0, lam, step, nsteps, record_every):
    p = np.array(p0, dtype=float)
    v = np.array(v0, dtype=float)
    n = p.shape[0]
    if nsteps % record_every:
        raise ValueError("nsteps must be a multiple of record_every")
    m = nsteps // record_every + 1
    P = np.empty((n, m, 3))
    V = np.empty((n, m, 3))
    P[:, 0], V[:, 0] = p, v
    row = 1
    for k in range(1, nsteps + 1):
        a1 = _heis_accel(p, v, lam)
        p2, v2 = p + 0.5 * step * v, v + 0.5 * step * a1
        a2 = _heis_accel(p2, v2, lam)
        p3, v3 = p + 0.5 * step * v2, v + 0.5 * step * a2
        a3 = _heis_accel(p3, v3, lam)
        p4, v4 = p + step * v3, v + step * a3
        a4 = _heis_accel(p4, v4, lam)
        p = p + (step / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (step / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if k % record_every == 0:
            P[:, row], V[:, row] = p, v
            row += 1
    return P, V


def _sph_accel(p, v, lam):
    pv = np.einsum("ni,ni->n", p, v)[:, None]
    vh = v - pv * p
    T = np.empty_like(p)
    T[:, 0] = -p[:, 1]
    T[:, 1] = p[:, 0]
    T[:, 2] = -p[:, 3]
    T[:, 3] = p[:, 2]
    vh = vh - np.einsum("ni,ni->n", vh, T)[:, None] * T
    jv = np.empty_like(vh)
    jv[:, 0] = -vh[:, 1]
    jv[:, 1] = vh[:, 0]
    jv[:, 2] = -vh[:, 3]
    jv[:, 3] = vh[:, 2]
    sq = np.einsum("ni,ni->n", v, v)[:, None]
    return -2.0 * lam * jv - sq * p


def rk4_sphere3(p0, v0, lam, step, nsteps, record_every):
    p = np.array(p0, dtype=float)
    v = np.array(v0, dtype=float)
    n = p.shape[0]
    if nsteps % record_every:
        raise ValueError("nsteps must be a multiple of record_every")
    m = nsteps // record_every + 1
    P = np.empty((n, m, 4))
    V = np.empty((n, m, 4))
    P[:, 0], V[:, 0] = p, v
    row = 1
    for k in range(1, nsteps + 1):
        a1 = _sph_accel(p, v, lam)
        p2, v2 = p + 0.5 * step * v, v + 0.5 * step * a1
        a2 = _sph_accel(p2, v2, lam)
        p3, v3 = p + 0.5 * step * v2, v + 0.5 * step * a2
        a3 = _sph_accel(p3, v3, lam)
        p4, v4 = p + step * v3, v + step * a3
        a4 = _sph_accel(p4, v4, lam)
        p = p + (step / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (step / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        # keep the trajectory on the unit sphere
        p = p / np.linalg.norm(p, axis=-1, keepdims=True)
        if k % record_every == 0:
            P[:, row], V[:, row] = p, v
            row += 1
    return P, V


def radial_parity(u, tris, sample_bin, bin_tri_idx, bin_tri_off):
    """Crossing parity of the radial rays {s*u_i : s > 1} with triangles.

    The line through the chart origin and u_i is intersected with the
    candidate triangles of the direction bin of sample i; a crossing counts
    when its line parameter exceeds 1 (i.e. beyond the sample, away from
    the origin).  tris is (m, 3, 3); sample_bin maps samples to bins;
    bin_tri_idx / bin_tri_off give each bin's candidate triangle indices.
    """
    u = np.asarray(u, dtype=float)
    tris = np.asarray(tris, dtype=float)
    n = u.shape[0]
    parity = np.zeros(n, dtype=np.uint8)
    a = tris[:, 0]
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    order = np.argsort(sample_bin, kind="stable")
    sorted_bins = sample_bin[order]
    starts = np.searchsorted(sorted_bins, np.unique(sorted_bins), side="left")
    bounds = np.append(starts, n)
    for k in range(len(bounds) - 1):
        sel = order[bounds[k] : bounds[k + 1]]
        b = sorted_bins[bounds[k]]
        ids = bin_tri_idx[bin_tri_off[b] : bin_tri_off[b + 1]]
        if len(ids) == 0:
            continue
        D = u[sel]  # (ns, 3) ray directions
        E1, E2, A = e1[ids], e2[ids], a[ids]  # (mt, 3)
        h = np.cross(D[:, None, :], E2[None, :, :])  # (ns, mt, 3)
        det = np.einsum("smi,mi->sm", h, E1)
        ok = np.abs(det) > 1e-300
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = -A  # origin - a, shared by all rays
        beta = np.einsum("smi,mi->sm", h, s) * inv
        q = np.cross(s, E1)  # (mt, 3)
        gamma = np.einsum("si,mi->sm", D, q) * inv
        t = np.einsum("mi,mi->m", E2, q)[None, :] * inv
        hit = ok & (beta >= 0.0) & (gamma >= 0.0) & (beta + gamma <= 1.0) & (t > 1.0)
        parity[sel] = (np.count_nonzero(hit, axis=1) & 1).astype(np.uint8)
    return parity
