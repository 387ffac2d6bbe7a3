"""Linear plants and controllers: closed-loop envelopes, FIR coefficients, order bounds
and the z-domain error transfer of the ARX reformulation.

Stability questions are answered with infinity norms of matrix powers
(``||A^k||^(1/k)`` upper-bounds the spectral radius for every ``k``), never
with an eigen-solver.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .core_sim import ControllerModel, PlantModel, as_vector, simulate_closed_loop
from .errors import ConvergenceRegionError, DimensionError, UnstableError
from .observer_arx import ArxController, KLDecay, ObserverForm

K_MAX = 512
SCHUR_THRESHOLD = 1.0 - 1e-9
# power norms below this sit near the subnormal range and lose relative precision
TINY_NORM = 1e-280
DEFAULT_MARGIN = 0.5
DEFAULT_OMEGA_GRID = 1024


def norm_inf(M):
    """Induced infinity norm (max absolute row sum); plain max-abs for vectors."""
    M = np.asarray(M)
    if M.ndim == 1:
        return float(np.max(np.abs(M))) if M.size else 0.0
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(M), axis=1)))


def _matrix(M, name, shape=None):
    a = np.atleast_2d(np.asarray(M, dtype=float))
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix")
    if shape is not None and a.shape != shape:
        raise DimensionError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _square(M, name="matrix"):
    a = _matrix(M, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def _power_norms(A, kmax):
    # naive compiled loops lose to BLAS beyond small sizes
    if A.shape[0] > 32:
        return kernels.BACKENDS["python"].power_norms(A, kmax)
    return kernels.power_norms(A, kmax)


def spectral_radius_estimate(A, k_max=K_MAX):
    """``min_k ||A^k||^(1/k)`` over ``1 <= k <= k_max`` (an upper estimate of rho)."""
    A = _square(A)
    norms = _power_norms(A, k_max)[1:]
    # a nilpotent n x n matrix has A^n = 0; later zeros are underflow
    if np.any(norms[:A.shape[0]] == 0.0):
        return 0.0
    k = np.arange(1, k_max + 1)
    keep = norms > TINY_NORM
    if not np.any(keep):
        return 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        roots = norms[keep] ** (1.0 / k[keep])
    return float(np.nanmin(roots))


def is_schur(A, k_max=K_MAX):
    """True iff the spectral radius of ``A`` is (numerically) below one.

    Sufficient test first: some power ``k <= k_max`` has norm below one.
    Otherwise the root test ``||A^k_max||^(1/k_max) < 1 - 1e-9`` decides.
    """
    A = _square(A)
    if A.shape[0] == 0:
        return True
    norms = _power_norms(A, k_max)
    if np.any(norms[1:] < 1.0):
        return True
    last = norms[k_max]
    return bool(math.isfinite(last) and last ** (1.0 / k_max) < SCHUR_THRESHOLD)


@dataclass(frozen=True)
class SpectralEnvelope:
    """``||A^t|| <= gain * rate**t`` for all ``t >= 0``."""

    gain: float
    rate: float

    def decay(self):
        return KLDecay(self.gain, self.rate)


def spectral_envelope(A, T_check=K_MAX, margin=DEFAULT_MARGIN):
    """Exponential envelope of the powers of a Schur matrix.

    The rate is ``max(rho + margin * (1 - rho), ||A^T||^(1/T))`` with
    ``T = T_check`` (or the last power before underflow); the second term
    makes the envelope hold beyond ``T`` too, since
    ``||A^(qT + r)|| <= ||A^T||^q ||A^r||``.
    """
    A = _square(A)
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    if not is_schur(A, max(T_check, K_MAX)):
        raise UnstableError("matrix is not Schur stable", spectral_radius_estimate(A))
    rho = spectral_radius_estimate(A, max(T_check, K_MAX))
    norms = _power_norms(A, T_check)
    # the tail term uses the last power that is clear of underflow; a power
    # that is exactly zero makes every later one zero as well
    k_tail = int(np.max(np.nonzero(norms > TINY_NORM)[0], initial=0))
    tail = 0.0 if norms[-1] == 0.0 or k_tail == 0 else norms[k_tail] ** (1.0 / k_tail)
    rate = max(rho + margin * (1.0 - rho), tail)
    rate = min(rate, math.nextafter(1.0, 0.0))
    t = np.arange(T_check + 1)
    envelope = rate ** t
    gain = float(np.max(norms / envelope))
    if np.any(norms > gain * envelope * (1.0 + 1e-12)):
        raise ArithmeticError("spectral envelope violated within T_check")
    return SpectralEnvelope(gain, float(rate))


@dataclass
class LinearPlant:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = _square(self.A, "A")
        n = self.A.shape[0]
        self.B = _matrix(self.B, "B")
        self.C = _matrix(self.C, "C")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise DimensionError(f"plant matrices inconsistent: A {self.A.shape}, B {self.B.shape}, C {self.C.shape}")

    @property
    def dims(self):
        return self.A.shape[0], self.B.shape[1], self.C.shape[0]

    def to_model(self):
        A, B, C = self.A, self.B, self.C
        n, nu, ny = self.dims
        return PlantModel(lambda x, u: A @ x + B @ u, lambda x: C @ x, n, nu, ny)


class LinearController:
    """``x_c(t+1) = F x_c + G y``, ``u = H x_c``, with observer gain ``R``.

    ``F - R H`` must be Schur. ``Fo`` may be passed when the observer matrix
    is known exactly (observer-based controllers) instead of being formed
    as ``F - R H``.
    """

    def __init__(self, F, G, H, R, Fo=None):
        self.F = _square(F, "F")
        n = self.F.shape[0]
        self.G = _matrix(G, "G")
        self.H = _matrix(H, "H")
        self.R = _matrix(R, "R")
        if self.G.shape[0] != n or self.H.shape[1] != n or self.R.shape != (n, self.H.shape[0]):
            raise DimensionError(
                f"controller matrices inconsistent: F {self.F.shape}, G {self.G.shape}, "
                f"H {self.H.shape}, R {self.R.shape}")
        self.observer_matrix = self.F - self.R @ self.H if Fo is None else _matrix(Fo, "Fo", (n, n))
        if not is_schur(self.observer_matrix):
            raise UnstableError("F - R H is not Schur stable", spectral_radius_estimate(self.observer_matrix))

    @property
    def dims(self):
        return self.F.shape[0], self.G.shape[1], self.H.shape[0]

    def to_model(self):
        F, G, H = self.F, self.G, self.H
        n, ny, nu = self.dims
        return ControllerModel(lambda x, y: F @ x + G @ y, lambda x: H @ x, n, ny, nu)

    def decay(self, margin=DEFAULT_MARGIN):
        return spectral_envelope(self.observer_matrix, margin=margin).decay()

    def observer_form(self, decay=None):
        """``f_o(x, y, u) = (F - R H) x + G y + R u``."""
        Fo, G, R = self.observer_matrix, self.G, self.R
        n, ny, nu = self.dims
        return ObserverForm(
            map=lambda x, y, u: Fo @ x + G @ y + R @ u,
            state_dim=n,
            decay=self.decay() if decay is None else decay,
            measurement_dim=ny,
            control_dim=nu,
            linear=(Fo, G, R),
        )

    def arx_controller(self, N, switch_time=None, decay=None):
        H = self.H
        return ArxController(self.observer_form(decay), lambda x: H @ x, N, self.to_model(), switch_time)


def observer_based_map(A, L, C, B, K):
    """Controller ``x+ = (A - L C) x + L y + B u, u = K x`` as a :class:`LinearController`.

    Its observer data ``(F - R H, G, R)`` is exactly ``(A - L C, L, B)``.
    """
    A, L, C, B, K = (_matrix(M, name) for M, name in zip((A, L, C, B, K), "ALCBK"))
    Fo = A - L @ C
    if not is_schur(Fo):
        raise UnstableError("A - L C is not Schur stable", spectral_radius_estimate(Fo))
    return LinearController(Fo + B @ K, L, K, B, Fo=Fo)


@dataclass
class ClosedLoopLinear:
    A_cl: np.ndarray
    B_cl: np.ndarray
    spectral: SpectralEnvelope
    gamma: float
    x0: np.ndarray
    plant: Optional[LinearPlant] = None
    controller: Optional[LinearController] = None


def closed_loop_matrices(plant, ctrl):
    A, B, C = plant.A, plant.B, plant.C
    F, G, H = ctrl.F, ctrl.G, ctrl.H
    if B.shape[1] != H.shape[0] or C.shape[0] != G.shape[1]:
        raise DimensionError("plant and controller dimensions do not match")
    A_cl = np.block([[A, B @ H], [G @ C, F]])
    np_, nc = A.shape[0], F.shape[0]
    B_cl = np.vstack([np.zeros((np_, nc)), np.eye(nc)])
    return A_cl, B_cl


def gamma_linear(cl, Cmat, Hmat):
    """``max(||C||, ||H||, 1) * M_cl / (1 - lambda_cl)``."""
    lam = cl.spectral.rate
    if not lam < 1.0:
        raise ValueError("closed-loop rate must be below one")
    return max(norm_inf(Cmat), norm_inf(Hmat), 1.0) * cl.spectral.gain / (1.0 - lam)


def delta_from_epsilon(epsilon, gamma):
    return epsilon / gamma


def build_closed_loop(plant, ctrl, x0, T_check=K_MAX, margin=DEFAULT_MARGIN):
    A_cl, B_cl = closed_loop_matrices(plant, ctrl)
    x0 = as_vector(x0, A_cl.shape[0], "x0")
    if not is_schur(A_cl):
        raise UnstableError("closed-loop matrix is not Schur stable", spectral_radius_estimate(A_cl))
    env = spectral_envelope(A_cl, T_check, margin)
    cl = ClosedLoopLinear(A_cl, B_cl, env, 0.0, x0, plant, ctrl)
    cl.gamma = gamma_linear(cl, plant.C, ctrl.H)
    return cl


@dataclass
class FirCoefficients:
    """``y_coeffs[k] = Fo^k G`` and ``u_coeffs[k] = Fo^k R`` for ``k < N``."""

    y_coeffs: np.ndarray
    u_coeffs: np.ndarray

    @property
    def order(self):
        return self.y_coeffs.shape[0]


def fir_coefficients(ctrl, N):
    if N < 1:
        raise ValueError("order N must be >= 1")
    Fo, G, R = ctrl.observer_matrix, ctrl.G, ctrl.R
    yc = np.empty((N,) + G.shape)
    uc = np.empty((N,) + R.shape)
    P = np.eye(Fo.shape[0])
    for k in range(N):
        yc[k] = P @ G
        uc[k] = P @ R
        P = P @ Fo
    return FirCoefficients(yc, uc)


def fir_apply(coeffs, y_window, u_window):
    """``sum_k y_coeffs[k] y(t-1-k) + u_coeffs[k] u(t-1-k)`` for newest-first windows."""
    N = coeffs.order
    yw = np.asarray(y_window, dtype=float).reshape(-1, coeffs.y_coeffs.shape[2])
    uw = np.asarray(u_window, dtype=float).reshape(-1, coeffs.u_coeffs.shape[2])
    if yw.shape[0] != N or uw.shape[0] != N:
        raise DimensionError(f"windows must hold N={N} samples, got {yw.shape[0]} and {uw.shape[0]}")
    return kernels.fir_sum(coeffs.y_coeffs, coeffs.u_coeffs, yw, uw)


def order_bound_linear(ctrl, M, epsilon, gamma, decay):
    """Smallest ``N`` with ``(||G|| + ||R||)(M + eps) M_o lambda_o^N <= eps / gamma``."""
    if not 0.0 < decay.rate < 1.0:
        raise ValueError("decay rate must lie in (0, 1)")
    if not epsilon > 0 or not gamma > 0:
        raise ValueError("epsilon and gamma must be positive")
    c = (norm_inf(ctrl.G) + norm_inf(ctrl.R)) * (M + epsilon) * decay.gain
    if c == 0.0:
        return 1
    target = epsilon / gamma
    n = max(1, math.ceil(math.log(target / c) / math.log(decay.rate)))
    while c * decay.rate ** n > target:
        n += 1
    while n > 1 and c * decay.rate ** (n - 1) <= target:
        n -= 1
    return n


def delta_N(ctrl, plantC, N):
    """``(F - R H)^N [G C, R H]``; the linear ARX perturbation is ``-delta_N x(t - N)``."""
    C = _matrix(plantC, "C")
    if C.shape[0] != ctrl.G.shape[1]:
        raise DimensionError("C rows must match controller measurement dimension")
    return np.linalg.matrix_power(ctrl.observer_matrix, N) @ np.hstack([ctrl.G @ C, ctrl.R @ ctrl.H])


def arx_loop_matrix(cl, ctrl, N):
    """State matrix of ``x(t+1) = A_cl x(t) - B_cl delta_N x(t-N)`` on ``[x(t); ...; x(t-N)]``."""
    n = cl.A_cl.shape[0]
    D = cl.B_cl @ delta_N(ctrl, cl.plant.C, N)
    m = (N + 1) * n
    aug = np.zeros((m, m))
    aug[:n, :n] = cl.A_cl
    aug[:n, N * n:] -= D
    aug[n:, :-n] = np.eye(N * n)
    return aug


def check_region_of_convergence(cl, ctrl, N):
    """Raise :class:`ConvergenceRegionError` unless E(z) is stable at order ``N``.

    Small-gain shortcut first: the delayed term is a feedback of size
    ``||B_cl delta_N||`` around a loop of l-inf gain ``M_cl / (1 - lambda_cl)``.
    Only when that product is not below one are the powers of the
    ``(N + 1) n`` augmented matrix examined.
    """
    D = cl.B_cl @ delta_N(ctrl, cl.plant.C, N)
    if norm_inf(D) * cl.spectral.gain / (1.0 - cl.spectral.rate) < 1.0:
        return
    aug = arx_loop_matrix(cl, ctrl, N)
    if not is_schur(aug):
        raise ConvergenceRegionError(N, spectral_radius_estimate(aug))


def error_transfer(cl, ctrl, N, omega):
    """``E(e^{j omega}) = P_N^{-1} (-B_cl delta_N z^{-(N-1)}) P^{-1} x0``.

    ``P(z) = zI - A_cl`` and ``P_N(z) = P(z) + B_cl delta_N z^{-N}``; both
    solves go through the split real/imaginary Gaussian elimination kernel.
    """
    n = cl.A_cl.shape[0]
    D = cl.B_cl @ delta_N(ctrl, cl.plant.C, N)
    c, s = math.cos(omega), math.sin(omega)
    I = np.eye(n)
    wr, wi = kernels.solve_split(c * I - cl.A_cl, s * I, cl.x0, np.zeros(n))
    w = wr + 1j * wi
    v = -(D @ w) * np.exp(-1j * (N - 1) * omega)
    cN, sN = math.cos(N * omega), math.sin(N * omega)
    er, ei = kernels.solve_split(c * I - cl.A_cl + cN * D, s * I - sN * D, v.real, v.imag)
    return er + 1j * ei


def frequency_sweep(cl, ctrl, N, n_grid=DEFAULT_OMEGA_GRID, check_region=True):
    """``(omega, ||E(e^{j omega})||)`` on a uniform grid over ``[0, 2 pi)``."""
    if n_grid < 64:
        raise ValueError("n_grid must be >= 64")
    if check_region:
        check_region_of_convergence(cl, ctrl, N)
    omegas = 2.0 * math.pi * np.arange(n_grid) / n_grid
    norms = np.array([np.max(np.abs(error_transfer(cl, ctrl, N, w))) for w in omegas])
    return omegas, norms


def frequency_sup_bound(cl, ctrl, N, n_grid=DEFAULT_OMEGA_GRID, check_region=True):
    """``max_omega ||E(e^{j omega})||``: grid search plus one golden-section refinement."""
    omegas, norms = frequency_sweep(cl, ctrl, N, n_grid, check_region)
    k = int(np.argmax(norms))
    best = float(norms[k])
    if best == 0.0:
        return 0.0
    h = 2.0 * math.pi / n_grid
    a, b = omegas[k] - h, omegas[k] + h

    def neg(w):
        return -float(np.max(np.abs(error_transfer(cl, ctrl, N, w))))

    if norms[k - 1] < best and norms[(k + 1) % n_grid] < best:
        res = minimize_scalar(neg, bracket=(a, omegas[k], b), method="golden")
        best = max(best, -float(res.fun))
    return best


@dataclass
class LinearArxRun:
    nominal: object
    arx: object
    controller: ArxController


def simulate_linear_arx(plant, ctrl, N, x_p0, x_c0, horizon, switch_time=None, decay=None):
    """Nominal and ARX closed-loop records for a linear plant/controller pair."""
    pm = plant.to_model()
    nominal = simulate_closed_loop(pm, ctrl.to_model(), x_p0, x_c0, horizon)
    arxc = ctrl.arx_controller(N, switch_time=N if switch_time is None else switch_time, decay=decay)
    arx = simulate_closed_loop(pm, arxc, x_p0, x_c0, horizon)
    return LinearArxRun(nominal, arx, arxc)
