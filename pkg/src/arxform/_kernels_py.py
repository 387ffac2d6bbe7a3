"""Pure-Python (numpy) implementations of the numerical kernels.

Every function here has a twin with the same signature and semantics in the
compiled ``_kernels`` extension; :mod:`arxform.kernels` picks one at import.
"""

import numpy as np

from .errors import SingularMatrixError

OVERFLOW_LIMIT = 1e150


def power_norms(A, kmax):
    """Infinity norms of ``A**k`` for ``k = 0..kmax``.

    Once a norm exceeds ``OVERFLOW_LIMIT`` the remaining entries are ``inf``;
    once a power is exactly zero the remaining entries are ``0``.
    """
    A = np.ascontiguousarray(A, dtype=float)
    n = A.shape[0]
    out = np.empty(kmax + 1)
    P = np.eye(n)
    out[0] = 1.0 if n else 0.0
    for k in range(1, kmax + 1):
        P = P @ A
        nrm = np.abs(P).sum(axis=1).max()
        out[k] = nrm
        if nrm > OVERFLOW_LIMIT:
            out[k + 1:] = np.inf
            break
        if nrm == 0.0:
            out[k + 1:] = 0.0
            break
    return out


def solve_split(Mr, Mi, br, bi, rel_tol=1e-12):
    """Solve ``(Mr + j Mi) x = br + j bi`` by Gaussian elimination.

    The complex system is rewritten as the real block system
    ``[[Mr, -Mi], [Mi, Mr]] [xr; xi] = [br; bi]`` and eliminated with partial
    pivoting. A pivot smaller than ``rel_tol`` times the largest entry of its
    (original) row is treated as singular.
    """
    Mr = np.asarray(Mr, dtype=float)
    Mi = np.asarray(Mi, dtype=float)
    n = Mr.shape[0]
    m = 2 * n
    a = np.empty((m, m))
    a[:n, :n] = Mr
    a[:n, n:] = -Mi
    a[n:, :n] = Mi
    a[n:, n:] = Mr
    b = np.concatenate([np.asarray(br, dtype=float), np.asarray(bi, dtype=float)])
    scale = np.abs(a).max(axis=1)
    pivots = np.empty(m)
    for k in range(m):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
            scale[[k, p]] = scale[[p, k]]
        piv = a[k, k]
        if abs(piv) < rel_tol * scale[k] or piv == 0.0:
            big = np.abs(pivots[:k]).max() if k else scale[k]
            raise SingularMatrixError(cond=big / max(abs(piv), 1e-300))
        pivots[k] = piv
        if k + 1 < m:
            f = a[k + 1:, k] / piv
            a[k + 1:, k:] -= np.outer(f, a[k, k:])
            b[k + 1:] -= f * b[k]
    x = np.empty(m)
    for k in range(m - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x[:n].copy(), x[n:].copy()


def affine_compose(Fo, G, R, y_window, u_window):
    """N-fold composition of ``x -> Fo x + G y + R u`` from the zero state.

    Windows are newest-first (row 0 is the most recent sample); the
    composition consumes them oldest-first.
    """
    Fo = np.asarray(Fo, dtype=float)
    x = np.zeros(Fo.shape[0])
    for k in range(len(y_window) - 1, -1, -1):
        x = Fo @ x + G @ y_window[k] + R @ u_window[k]
    return x


def fir_sum(y_coeffs, u_coeffs, y_window, u_window):
    """``sum_k y_coeffs[k] @ y_window[k] + u_coeffs[k] @ u_window[k]``."""
    return (np.einsum("kij,kj->i", np.asarray(y_coeffs, dtype=float), np.asarray(y_window, dtype=float))
            + np.einsum("kij,kj->i", np.asarray(u_coeffs, dtype=float), np.asarray(u_window, dtype=float)))
