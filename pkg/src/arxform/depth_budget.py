"""Leveled-operation accounting for encrypted evaluation.

This is a mock, not a cryptosystem: a :class:`BudgetedValue` is a plaintext
fixed-point integer that carries the bookkeeping a leveled homomorphic scheme
would impose. Multiplications by non-integer constants consume one level
(modelling rescaling); additions and integer scalings are free. The point is
to show that an ARX controller needs the same number of levels at every
step, while a recursively updated encrypted state runs out.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DepthExhausted

FIXED_POINT_BITS = 31
# covers float rounding in the noise bookkeeping itself
NOISE_SLACK = 1.0 + 2.0 ** -40


@dataclass(frozen=True)
class BudgetPolicy:
    initial_depth: int
    scale_bits: int = 16

    def __post_init__(self):
        if self.initial_depth < 0:
            raise ValueError("initial_depth must be nonnegative")
        if self.scale_bits < 8:
            raise ValueError("scale_bits must be >= 8")


@dataclass(frozen=True)
class BudgetedValue:
    """``value * 2**-scale`` approximates a real; ``noise`` bounds the error."""

    value: int
    scale: int
    depth_left: int
    op_count: int
    noise: float

    def decode(self):
        return math.ldexp(self.value, -self.scale)


def _round_shift(v, s):
    # round(v / 2**s), ties away from zero
    half = 1 << (s - 1)
    return (v + half) >> s if v >= 0 else -((-v + half) >> s)


def encrypt_fresh(x, policy):
    s = policy.scale_bits
    if not math.isfinite(x) or abs(x) >= 2.0 ** (FIXED_POINT_BITS - s):
        raise OverflowError(f"{x!r} is outside the fixed-point range +-2^{FIXED_POINT_BITS - s}")
    return BudgetedValue(int(round(math.ldexp(x, s))), s, policy.initial_depth, 0, math.ldexp(1.0, -s - 1))


def decrypt(v):
    return v.decode()


def bv_add(a, b):
    if a.scale != b.scale:
        raise ValueError(f"scale mismatch: {a.scale} vs {b.scale}")
    return BudgetedValue(a.value + b.value, a.scale, min(a.depth_left, b.depth_left),
                         a.op_count + b.op_count + 1, (a.noise + b.noise) * NOISE_SLACK)


def bv_sub(a, b):
    return bv_add(a, bv_neg(b))


def bv_neg(a):
    return BudgetedValue(-a.value, a.scale, a.depth_left, a.op_count, a.noise)


def bv_mul_int(a, k):
    """Scaling by an integer: repeated addition, no level consumed."""
    k = int(k)
    return BudgetedValue(a.value * k, a.scale, a.depth_left, a.op_count + 1, abs(k) * a.noise * NOISE_SLACK)


def bv_mul_plain(a, c):
    """Multiply by a plaintext real constant, then rescale back to ``a.scale``.

    ``c`` is encoded at the same scale first. The tracked noise covers the
    incoming noise, the encoding error of ``c`` and the rescaling error.
    """
    if a.depth_left <= 0:
        raise DepthExhausted("no multiplicative depth left")
    s = a.scale
    cq = int(round(math.ldexp(c, s)))
    ulp_half = math.ldexp(1.0, -s - 1)
    c_err = abs(cq * 2.0 ** -s - c)
    noise = (abs(cq) * 2.0 ** -s * a.noise + (abs(a.decode()) + a.noise) * c_err + ulp_half) * NOISE_SLACK
    return BudgetedValue(_round_shift(a.value * cq, s), s, a.depth_left - 1, a.op_count + 1, noise)


def bv_mul(a, b):
    """Ciphertext-ciphertext product; consumes one level of the shallower operand."""
    if a.scale != b.scale:
        raise ValueError(f"scale mismatch: {a.scale} vs {b.scale}")
    depth = min(a.depth_left, b.depth_left)
    if depth <= 0:
        raise DepthExhausted("no multiplicative depth left")
    s = a.scale
    da, db = abs(a.decode()), abs(b.decode())
    noise = (da * b.noise + db * a.noise + a.noise * b.noise + math.ldexp(1.0, -s - 1)) * NOISE_SLACK
    return BudgetedValue(_round_shift(a.value * b.value, s), s, depth - 1,
                         a.op_count + b.op_count + 1, noise)


def _plain_matvec(M, xs):
    """``M @ xs`` with every (also zero) coefficient multiplied, one level deep."""
    out = []
    for row in np.atleast_2d(M):
        acc = None
        for c, x in zip(row, xs):
            term = bv_mul_plain(x, float(c))
            acc = term if acc is None else bv_add(acc, term)
        out.append(acc)
    return out


@dataclass
class ArxEvaluation:
    u: list
    depth_used: int
    op_count: int
    noise: float

    def decode(self):
        return np.array([v.decode() for v in self.u])


def evaluate_arx_encrypted(coeffs, H, y_window, u_window, policy):
    """One ARX output from fresh encrypted windows.

    ``x_c = sum_k y_coeffs[k] y(t-1-k) + u_coeffs[k] u(t-1-k)`` takes one
    plaintext-multiplication level, ``u = H x_c`` a second one.
    """
    N = coeffs.order
    if len(y_window) != N or len(u_window) != N:
        raise ValueError(f"windows must hold N={N} samples")
    for v in list(np.ravel(y_window)) + list(np.ravel(u_window)):
        if v.depth_left != policy.initial_depth:
            raise ValueError("window entries must be fresh encryptions")
    n = coeffs.y_coeffs.shape[1]
    xs = [None] * n
    for k in range(N):
        for block, sample in ((coeffs.y_coeffs[k], y_window[k]), (coeffs.u_coeffs[k], u_window[k])):
            part = _plain_matvec(block, list(sample))
            xs = [p if acc is None else bv_add(acc, p) for acc, p in zip(xs, part)]
    u = _plain_matvec(H, xs)
    depth_used = policy.initial_depth - min(v.depth_left for v in u)
    return ArxEvaluation(u, depth_used, sum(v.op_count for v in u), max(v.noise for v in u))


def encrypted_arx_run(plant, ctrl, N, x_p0, x_c0, horizon, policy, switch_time=None):
    """Closed loop where every output from ``switch_time`` (default ``N``) on is
    evaluated encrypted.

    Measurements are encrypted fresh by the sensor and each decoded input is
    re-encrypted fresh for the windows, so every evaluation starts at full
    budget. Earlier inputs come from the plaintext recursion. Each report
    also carries ``error``: the distance of the decoded input from the
    plaintext ARX output on the same windows.
    """
    from .linear_analysis import fir_apply, fir_coefficients

    switch_time = N if switch_time is None else switch_time
    if switch_time < N:
        raise ValueError("switch_time must be >= N")
    coeffs = fir_coefficients(ctrl, N)
    A, B, C = plant.A, plant.B, plant.C
    F, G, H = ctrl.F, ctrl.G, ctrl.H
    xp = np.asarray(x_p0, dtype=float)
    xc = np.asarray(x_c0, dtype=float)
    ys, us, reports = [], [], []
    for t in range(horizon):
        y = C @ xp
        if t < switch_time:
            u = H @ xc
            xc = F @ xc + G @ y
        else:
            yp = np.array([ys[t - 1 - k] for k in range(N)])
            up = np.array([us[t - 1 - k] for k in range(N)])
            yw = [[encrypt_fresh(float(v), policy) for v in row] for row in yp]
            uw = [[encrypt_fresh(float(v), policy) for v in row] for row in up]
            ev = evaluate_arx_encrypted(coeffs, H, yw, uw, policy)
            u = ev.decode()
            err = float(np.max(np.abs(u - H @ fir_apply(coeffs, yp, up))))
            reports.append({"step": t, "depth_used": ev.depth_used, "op_count": ev.op_count,
                            "noise": ev.noise, "error": err, "re_encryptions": len(u)})
        ys.append(y)
        us.append(u)
        xp = A @ xp + B @ u
    return reports, np.array(us), np.array(ys)


def evaluate_recursive_encrypted(ctrl, y_stream, policy):
    """Run ``x_c <- F x_c + G y`` with the state never re-encrypted.

    Returns the step at which a multiplication hits an exhausted budget, or
    ``None`` if the stream ends first. Integer entries of ``F`` are applied
    as free integer scalings; every other entry costs a level per step.
    """
    F, G, H = ctrl.F, ctrl.G, ctrl.H
    n = F.shape[0]
    xc = [encrypt_fresh(0.0, policy) for _ in range(n)]

    def apply(M, xs):
        out = []
        for row in M:
            acc = None
            for c, x in zip(row, xs):
                c = float(c)
                term = bv_mul_int(x, int(c)) if c.is_integer() else bv_mul_plain(x, c)
                acc = term if acc is None else bv_add(acc, term)
            out.append(acc)
        return out

    for t, y in enumerate(y_stream):
        try:
            apply(H, xc)
            ye = [encrypt_fresh(float(v), policy) for v in np.atleast_1d(y)]
            xc = [bv_add(a, b) for a, b in zip(apply(F, xc), apply(G, ye))]
        except DepthExhausted:
            return t
    return None
