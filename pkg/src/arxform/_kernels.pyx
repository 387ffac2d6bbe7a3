# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot numerical kernels.

Semantics are identical to :mod:`arxform._kernels_py`; see there for details.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

from .errors import SingularMatrixError

cnp.import_array()

cdef double OVERFLOW_LIMIT = 1e150


def power_norms(A, Py_ssize_t kmax):
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef double[:, ::1] P = np.eye(n)
    cdef double[:, ::1] Q = np.empty((n, n))
    cdef double[::1] out = np.empty(kmax + 1)
    cdef Py_ssize_t i, j, l, k, r
    cdef double s, row, nrm
    out[0] = 1.0 if n else 0.0
    for k in range(1, kmax + 1):
        nrm = 0.0
        for i in range(n):
            row = 0.0
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += P[i, l] * a[l, j]
                Q[i, j] = s
                row += fabs(s)
            if row > nrm:
                nrm = row
        P, Q = Q, P
        out[k] = nrm
        if nrm > OVERFLOW_LIMIT:
            for r in range(k + 1, kmax + 1):
                out[r] = INFINITY
            break
        if nrm == 0.0:
            for r in range(k + 1, kmax + 1):
                out[r] = 0.0
            break
    return np.asarray(out)


def solve_split(Mr, Mi, br, bi, double rel_tol=1e-12):
    cdef double[:, ::1] mr = np.ascontiguousarray(Mr, dtype=np.float64)
    cdef double[:, ::1] mi = np.ascontiguousarray(Mi, dtype=np.float64)
    cdef double[::1] vr = np.ascontiguousarray(br, dtype=np.float64)
    cdef double[::1] vi = np.ascontiguousarray(bi, dtype=np.float64)
    cdef Py_ssize_t n = mr.shape[0]
    cdef Py_ssize_t m = 2 * n
    cdef double[:, ::1] a = np.empty((m, m))
    cdef double[::1] b = np.empty(m)
    cdef double[::1] scale = np.empty(m)
    cdef double[::1] x = np.empty(m)
    cdef Py_ssize_t i, j, k, p
    cdef double piv, f, t, best, big
    for i in range(n):
        for j in range(n):
            a[i, j] = mr[i, j]
            a[i, j + n] = -mi[i, j]
            a[i + n, j] = mi[i, j]
            a[i + n, j + n] = mr[i, j]
        b[i] = vr[i]
        b[i + n] = vi[i]
    for i in range(m):
        t = 0.0
        for j in range(m):
            if fabs(a[i, j]) > t:
                t = fabs(a[i, j])
        scale[i] = t
    big = 0.0
    for k in range(m):
        p = k
        best = fabs(a[k, k])
        for i in range(k + 1, m):
            if fabs(a[i, k]) > best:
                best = fabs(a[i, k])
                p = i
        if p != k:
            for j in range(m):
                t = a[k, j]; a[k, j] = a[p, j]; a[p, j] = t
            t = b[k]; b[k] = b[p]; b[p] = t
            t = scale[k]; scale[k] = scale[p]; scale[p] = t
        piv = a[k, k]
        if fabs(piv) < rel_tol * scale[k] or piv == 0.0:
            if k == 0:
                big = scale[k]
            raise SingularMatrixError(cond=big / max(fabs(piv), 1e-300))
        if fabs(piv) > big:
            big = fabs(piv)
        for i in range(k + 1, m):
            f = a[i, k] / piv
            if f != 0.0:
                for j in range(k, m):
                    a[i, j] -= f * a[k, j]
                b[i] -= f * b[k]
    for k in range(m - 1, -1, -1):
        t = b[k]
        for j in range(k + 1, m):
            t -= a[k, j] * x[j]
        x[k] = t / a[k, k]
    xa = np.asarray(x)
    return xa[:n].copy(), xa[n:].copy()


def affine_compose(Fo, G, R, y_window, u_window):
    cdef double[:, ::1] fo = np.ascontiguousarray(Fo, dtype=np.float64)
    cdef double[:, ::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[:, ::1] yw = np.ascontiguousarray(y_window, dtype=np.float64)
    cdef double[:, ::1] uw = np.ascontiguousarray(u_window, dtype=np.float64)
    cdef Py_ssize_t n = fo.shape[0], ny = g.shape[1], nu = r.shape[1]
    cdef Py_ssize_t N = yw.shape[0]
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] z = np.empty(n)
    cdef Py_ssize_t i, j, k
    cdef double s
    for k in range(N - 1, -1, -1):
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += fo[i, j] * x[j]
            z[i] = s
        for i in range(n):
            s = 0.0
            for j in range(ny):
                s += g[i, j] * yw[k, j]
            z[i] += s
            s = 0.0
            for j in range(nu):
                s += r[i, j] * uw[k, j]
            z[i] += s
        x, z = z, x
    return np.asarray(x).copy()


def fir_sum(y_coeffs, u_coeffs, y_window, u_window):
    cdef double[:, :, ::1] yc = np.ascontiguousarray(y_coeffs, dtype=np.float64)
    cdef double[:, :, ::1] uc = np.ascontiguousarray(u_coeffs, dtype=np.float64)
    cdef double[:, ::1] yw = np.ascontiguousarray(y_window, dtype=np.float64)
    cdef double[:, ::1] uw = np.ascontiguousarray(u_window, dtype=np.float64)
    cdef Py_ssize_t N = yc.shape[0], n = yc.shape[1], ny = yc.shape[2], nu = uc.shape[2]
    cdef double[::1] x = np.zeros(n)
    cdef Py_ssize_t i, j, k
    for k in range(N):
        for i in range(n):
            for j in range(ny):
                x[i] += yc[k, i, j] * yw[k, j]
            for j in range(nu):
                x[i] += uc[k, i, j] * uw[k, j]
    return np.asarray(x)
