# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: batched RK4 curve integration and radial ray parity.

Mirrors srforms._kernels_py; the python module is the reference
implementation and the parity tests compare the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef double _FD = 1e-5


cdef inline void _heis_metric(double x, double y, double g[3][3]) noexcept nogil:
    g[0][0] = 1.0 + y * y
    g[1][1] = 1.0 + x * x
    g[2][2] = 1.0
    g[0][1] = -x * y
    g[1][0] = -x * y
    g[0][2] = -y
    g[2][0] = -y
    g[1][2] = x
    g[2][1] = x


cdef void _heis_acc(double* p, double* v, double lam, double* out) noexcept nogil:
    cdef double dg[3][3][3]
    cdef double gp[3][3]
    cdef double gm[3][3]
    cdef double g[3][3]
    cdef double c[3]
    cdef double gam[3]
    cdef double q[3]
    cdef int i, l, j, a, b
    cdef double det, inv

    for i in range(3):
        q[0] = p[0]; q[1] = p[1]; q[2] = p[2]
        q[i] = p[i] + _FD
        _heis_metric(q[0], q[1], gp)
        q[i] = p[i] - _FD
        _heis_metric(q[0], q[1], gm)
        for a in range(3):
            for b in range(3):
                dg[i][a][b] = (gp[a][b] - gm[a][b]) / (2.0 * _FD)

    for l in range(3):
        c[l] = 0.0
        for i in range(3):
            for j in range(3):
                c[l] += v[i] * v[j] * (dg[i][l][j] - 0.5 * dg[l][i][j])

    _heis_metric(p[0], p[1], g)
    # 3x3 solve by the adjugate; the chart metric has unit determinant
    det = (
        g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
        - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
    )
    inv = 1.0 / det
    gam[0] = inv * (
        (g[1][1] * g[2][2] - g[1][2] * g[2][1]) * c[0]
        + (g[0][2] * g[2][1] - g[0][1] * g[2][2]) * c[1]
        + (g[0][1] * g[1][2] - g[0][2] * g[1][1]) * c[2]
    )
    gam[1] = inv * (
        (g[1][2] * g[2][0] - g[1][0] * g[2][2]) * c[0]
        + (g[0][0] * g[2][2] - g[0][2] * g[2][0]) * c[1]
        + (g[0][2] * g[1][0] - g[0][0] * g[1][2]) * c[2]
    )
    gam[2] = inv * (
        (g[1][0] * g[2][1] - g[1][1] * g[2][0]) * c[0]
        + (g[0][1] * g[2][0] - g[0][0] * g[2][1]) * c[1]
        + (g[0][0] * g[1][1] - g[0][1] * g[1][0]) * c[2]
    )

    out[0] = -2.0 * lam * (-v[1]) - gam[0]
    out[1] = -2.0 * lam * (v[0]) - gam[1]
    out[2] = -2.0 * lam * (-(p[0] * v[0] + p[1] * v[1])) - gam[2]


def rk4_heisenberg(cnp.ndarray[double, ndim=2] p0,
                   cnp.ndarray[double, ndim=2] v0,
                   double lam, double step, long nsteps, long record_every):
    if nsteps % record_every:
        raise ValueError("nsteps must be a multiple of record_every")
    cdef long n = p0.shape[0]
    cdef long m = nsteps // record_every + 1
    cdef cnp.ndarray[double, ndim=3] P = np.empty((n, m, 3))
    cdef cnp.ndarray[double, ndim=3] V = np.empty((n, m, 3))
    cdef double p[3]
    cdef double v[3]
    cdef double p2[3]
    cdef double v2[3]
    cdef double p3[3]
    cdef double v3[3]
    cdef double p4[3]
    cdef double v4[3]
    cdef double a1[3]
    cdef double a2[3]
    cdef double a3[3]
    cdef double a4[3]
    cdef long i, k, row, c

    for i in range(n):
        for c in range(3):
            p[c] = p0[i, c]
            v[c] = v0[i, c]
            P[i, 0, c] = p[c]
            V[i, 0, c] = v[c]
        row = 1
        for k in range(1, nsteps + 1):
            _heis_acc(p, v, lam, a1)
            for c in range(3):
                p2[c] = p[c] + 0.5 * step * v[c]
                v2[c] = v[c] + 0.5 * step * a1[c]
            _heis_acc(p2, v2, lam, a2)
            for c in range(3):
                p3[c] = p[c] + 0.5 * step * v2[c]
                v3[c] = v[c] + 0.5 * step * a2[c]
            _heis_acc(p3, v3, lam, a3)
            for c in range(3):
                p4[c] = p[c] + step * v3[c]
                v4[c] = v[c] + step * a3[c]
            _heis_acc(p4, v4, lam, a4)
            for c in range(3):
                p[c] = p[c] + (step / 6.0) * (v[c] + 2.0 * v2[c] + 2.0 * v3[c] + v4[c])
                v[c] = v[c] + (step / 6.0) * (a1[c] + 2.0 * a2[c] + 2.0 * a3[c] + a4[c])
            if k % record_every == 0:
                for c in range(3):
                    P[i, row, c] = p[c]
                    V[i, row, c] = v[c]
                row += 1
    return P, V


cdef void _sph_acc(double* p, double* v, double lam, double* out) noexcept nogil:
    cdef double T[4]
    cdef double vh[4]
    cdef double jv[4]
    cdef double pv = 0.0, vt = 0.0, sq = 0.0
    cdef int c
    for c in range(4):
        pv += p[c] * v[c]
        sq += v[c] * v[c]
    for c in range(4):
        vh[c] = v[c] - pv * p[c]
    T[0] = -p[1]; T[1] = p[0]; T[2] = -p[3]; T[3] = p[2]
    for c in range(4):
        vt += vh[c] * T[c]
    for c in range(4):
        vh[c] = vh[c] - vt * T[c]
    jv[0] = -vh[1]; jv[1] = vh[0]; jv[2] = -vh[3]; jv[3] = vh[2]
    for c in range(4):
        out[c] = -2.0 * lam * jv[c] - sq * p[c]


def rk4_sphere3(cnp.ndarray[double, ndim=2] p0,
                cnp.ndarray[double, ndim=2] v0,
                double lam, double step, long nsteps, long record_every):
    if nsteps % record_every:
        raise ValueError("nsteps must be a multiple of record_every")
    cdef long n = p0.shape[0]
    cdef long m = nsteps // record_every + 1
    cdef cnp.ndarray[double, ndim=3] P = np.empty((n, m, 4))
    cdef cnp.ndarray[double, ndim=3] V = np.empty((n, m, 4))
    cdef double p[4]
    cdef double v[4]
    cdef double p2[4]
    cdef double v2[4]
    cdef double p3[4]
    cdef double v3[4]
    cdef double p4[4]
    cdef double v4[4]
    cdef double a1[4]
    cdef double a2[4]
    cdef double a3[4]
    cdef double a4[4]
    cdef double nrm
    cdef long i, k, row, c

    for i in range(n):
        for c in range(4):
            p[c] = p0[i, c]
            v[c] = v0[i, c]
            P[i, 0, c] = p[c]
            V[i, 0, c] = v[c]
        row = 1
        for k in range(1, nsteps + 1):
            _sph_acc(p, v, lam, a1)
            for c in range(4):
                p2[c] = p[c] + 0.5 * step * v[c]
                v2[c] = v[c] + 0.5 * step * a1[c]
            _sph_acc(p2, v2, lam, a2)
            for c in range(4):
                p3[c] = p[c] + 0.5 * step * v2[c]
                v3[c] = v[c] + 0.5 * step * a2[c]
            _sph_acc(p3, v3, lam, a3)
            for c in range(4):
                p4[c] = p[c] + step * v3[c]
                v4[c] = v[c] + step * a3[c]
            _sph_acc(p4, v4, lam, a4)
            nrm = 0.0
            for c in range(4):
                p[c] = p[c] + (step / 6.0) * (v[c] + 2.0 * v2[c] + 2.0 * v3[c] + v4[c])
                v[c] = v[c] + (step / 6.0) * (a1[c] + 2.0 * a2[c] + 2.0 * a3[c] + a4[c])
                nrm += p[c] * p[c]
            nrm = sqrt(nrm)
            for c in range(4):
                p[c] = p[c] / nrm
            if k % record_every == 0:
                for c in range(4):
                    P[i, row, c] = p[c]
                    V[i, row, c] = v[c]
                row += 1
    return P, V


def radial_parity(cnp.ndarray[double, ndim=2] u,
                  cnp.ndarray[double, ndim=3] tris,
                  cnp.ndarray[cnp.int64_t, ndim=1] sample_bin,
                  cnp.ndarray[cnp.int64_t, ndim=1] bin_tri_idx,
                  cnp.ndarray[cnp.int64_t, ndim=1] bin_tri_off):
    cdef long n = u.shape[0]
    cdef long m = tris.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] parity = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[double, ndim=2] A = np.ascontiguousarray(tris[:, 0, :])
    cdef cnp.ndarray[double, ndim=2] E1 = np.ascontiguousarray(tris[:, 1, :] - tris[:, 0, :])
    cdef cnp.ndarray[double, ndim=2] E2 = np.ascontiguousarray(tris[:, 2, :] - tris[:, 0, :])
    cdef long i, j, b, tid
    cdef double d0, d1, d2, h0, h1, h2, q0, q1, q2
    cdef double det, inv, beta, gamma, t
    cdef long hits

    for i in range(n):
        b = sample_bin[i]
        hits = 0
        d0 = u[i, 0]; d1 = u[i, 1]; d2 = u[i, 2]
        for j in range(bin_tri_off[b], bin_tri_off[b + 1]):
            tid = bin_tri_idx[j]
            # h = d x e2
            h0 = d1 * E2[tid, 2] - d2 * E2[tid, 1]
            h1 = d2 * E2[tid, 0] - d0 * E2[tid, 2]
            h2 = d0 * E2[tid, 1] - d1 * E2[tid, 0]
            det = E1[tid, 0] * h0 + E1[tid, 1] * h1 + E1[tid, 2] * h2
            if fabs(det) <= 1e-300:
                continue
            inv = 1.0 / det
            # s = -a (ray origin is the chart center)
            beta = -(A[tid, 0] * h0 + A[tid, 1] * h1 + A[tid, 2] * h2) * inv
            if beta < 0.0:
                continue
            # q = s x e1
            q0 = -(A[tid, 1] * E1[tid, 2] - A[tid, 2] * E1[tid, 1])
            q1 = -(A[tid, 2] * E1[tid, 0] - A[tid, 0] * E1[tid, 2])
            q2 = -(A[tid, 0] * E1[tid, 1] - A[tid, 1] * E1[tid, 0])
            gamma = (d0 * q0 + d1 * q1 + d2 * q2) * inv
            if gamma < 0.0 or beta + gamma > 1.0:
                continue
            t = (E2[tid, 0] * q0 + E2[tid, 1] * q1 + E2[tid, 2] * q2) * inv
            if t > 1.0:
                hits += 1
        parity[i] = <cnp.uint8_t> (hits & 1)
    return parity
