"""Observer-form ARX controllers.

A controller ``x_c(t+1) = f_c(x_c, y), u = h_c(x_c)`` is replaced by an
observer form ``f_o(x_c, y, u)`` with ``f_o(x, y, h_c(x)) = f_c(x, y)`` whose
state flow forgets its initial condition. The ARX controller of order ``N``
then computes

    x_c(t) = f_o^N(0, Y_N(t-1), U_N(t-1)),   u(t) = h_c(x_c(t))

from the last ``N`` measurements and inputs only, after a warm-up phase that
runs the original recursion.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from . import kernels
from .core_sim import ControllerModel, Trajectory, as_vector
from .errors import DimensionError

DEFAULT_SWITCH_TIME = 20
GRID_POINTS_PER_AXIS = 33
MAX_GRID_POINTS = 200_000


@dataclass(frozen=True)
class KLDecay:
    """Exponential class-KL envelope ``beta(s, t) = gain * rate**t * s``."""

    gain: float
    rate: float

    def __post_init__(self):
        if not self.gain > 0 or not math.isfinite(self.gain):
            raise ValueError(f"decay gain must be positive and finite, got {self.gain}")
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"decay rate must lie in (0, 1), got {self.rate}")

    def __call__(self, s, t):
        return self.gain * self.rate ** t * s

    @classmethod
    def majorant(cls, table, rate=None):
        """Exponential envelope dominating a tabulated ``beta(1, t)``, t = 0, 1, ...

        Without ``rate`` the slowest observed per-step decay is used.
        """
        b = np.asarray(table, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(b < 0) or b[0] <= 0:
            raise ValueError("table must hold beta(1, t) for t = 0, 1, ... with beta(1, 0) > 0")
        t = np.arange(b.size)
        if rate is None:
            rate = float(np.max((b[1:] / b[0]) ** (1.0 / t[1:])))
            rate = max(rate, 1e-3)
        if not 0.0 < rate < 1.0:
            raise ValueError(f"tabulated envelope does not decay (rate {rate:.6g})")
        return cls(float(np.max(b / rate ** t)), float(rate))


@dataclass
class ObserverForm:
    """``f_o(x_c, y, u)`` plus its decay certificate.

    ``linear`` optionally holds ``(Fo, G, R)`` when ``f_o = Fo x + G y + R u``;
    compositions then run in the compiled kernel.
    """

    map: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    state_dim: int
    decay: Optional[KLDecay]
    measurement_dim: int
    control_dim: int
    linear: Optional[tuple] = None

    def __call__(self, x, y, u):
        return np.asarray(self.map(x, y, u), dtype=float)


def _window_array(w, dim, name):
    a = np.asarray(w, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, dim)
    if a.ndim != 2 or a.shape[1] != dim:
        raise DimensionError(f"{name} must have shape (N, {dim}), got {a.shape}")
    return a


def compose_fo_N(observer, y_window, u_window):
    """``f_o^N(0, Y, U)`` for newest-first windows of equal length ``N``."""
    yw = _window_array(y_window, observer.measurement_dim, "y window")
    uw = _window_array(u_window, observer.control_dim, "u window")
    if yw.shape[0] != uw.shape[0]:
        raise DimensionError(f"window lengths differ: {yw.shape[0]} vs {uw.shape[0]}")
    if yw.shape[0] == 0:
        raise DimensionError("windows must hold at least one sample")
    if observer.linear is not None:
        Fo, G, R = observer.linear
        return kernels.affine_compose(Fo, G, R, yw, uw)
    x = np.zeros(observer.state_dim)
    for k in range(yw.shape[0] - 1, -1, -1):
        x = observer(x, yw[k], uw[k])
    return x


def window_perturbation(observer, y_window, u_window):
    """``f_o^N(0, Y_N(t), U_N(t)) - f_o^{N+1}(0, Y_{N+1}(t), U_{N+1}(t))``.

    The windows hold ``N + 1`` newest-first samples; this is the perturbation
    an ARX controller of order ``N`` injects at time ``t``.
    """
    yw = _window_array(y_window, observer.measurement_dim, "y window")
    uw = _window_array(u_window, observer.control_dim, "u window")
    if yw.shape[0] < 2:
        raise DimensionError("need N + 1 >= 2 samples")
    return compose_fo_N(observer, yw[:-1], uw[:-1]) - compose_fo_N(observer, yw, uw)


def observer_consistency_error(controller, observer, sample_box, n_samples):
    """Largest ``||f_o(x, y, h_c(x)) - f_c(x, y)||`` over Halton samples of the box.

    ``sample_box`` is a half-width ``r`` (box ``[-r, r]`` on every axis) or a
    sequence of ``(low, high)`` pairs for the stacked ``(x_c, y)``.
    """
    if observer.state_dim != controller.state_dim or observer.measurement_dim != controller.input_dim:
        raise DimensionError("observer form and controller dimensions differ")
    nx, ny = controller.state_dim, controller.input_dim
    d = nx + ny
    if np.isscalar(sample_box):
        lo, hi = -float(sample_box) * np.ones(d), float(sample_box) * np.ones(d)
    else:
        box = np.asarray(sample_box, dtype=float)
        if box.shape != (d, 2):
            raise DimensionError(f"sample box must have shape ({d}, 2), got {box.shape}")
        lo, hi = box[:, 0], box[:, 1]
    pts = lo + (hi - lo) * qmc.Halton(d, scramble=False).random(n_samples)
    worst = 0.0
    for p in pts:
        x, y = p[:nx], p[nx:]
        u = np.asarray(controller.output(x), dtype=float)
        err = np.max(np.abs(observer(x, y, u) - np.asarray(controller.dynamics(x, y), dtype=float)))
        worst = max(worst, float(err))
    return worst


def check_observer_consistency(controller, observer, sample_box, n_samples, tol):
    if not tol > 0:
        raise ValueError("tol must be positive")
    return observer_consistency_error(controller, observer, sample_box, n_samples) <= tol


class ArxController:
    """ARX controller of order ``N`` with a recursive warm-up phase.

    For ``t < switch_time`` the warm-up controller's recursion runs verbatim;
    from ``switch_time`` on, ``x_c(t)`` is recomputed from the two length-``N``
    windows. Windows are stored newest-first.
    """

    def __init__(self, observer, output_map, order, warmup, switch_time=None):
        if order < 1:
            raise ValueError("order N must be >= 1")
        if switch_time is None:
            switch_time = max(order, DEFAULT_SWITCH_TIME)
        if switch_time < order:
            raise ValueError(f"switch_time={switch_time} is smaller than the order N={order}")
        if observer.state_dim != warmup.state_dim:
            raise DimensionError("observer and warm-up controller state dimensions differ")
        self.observer = observer
        self.output_map = output_map
        self.order = int(order)
        self.warmup = warmup
        self.reference = warmup
        self.switch_time = int(switch_time)
        self.y_window = deque(maxlen=self.order)
        self.u_window = deque(maxlen=self.order)
        self.state = None
        self.evaluations = 0
        self._t = -1

    def reset(self, x_c0):
        self._x0 = as_vector(x_c0, self.warmup.state_dim, "x_c0")
        self.y_window.clear()
        self.u_window.clear()
        self.state = None
        self._pending = None
        self._t = -1

    def windows(self):
        """Current windows as newest-first arrays."""
        return np.array(self.y_window), np.array(self.u_window)

    def step(self, t, y):
        if t != self._t + 1:
            raise ValueError(f"ARX controller stepped at t={t}, expected t={self._t + 1}")
        self.evaluations = 0
        self.state = self._x0 if t == 0 else self.next_state()
        if t >= self.switch_time:
            self.evaluations = self.order
        u = np.atleast_1d(np.asarray(self.output_map(self.state), dtype=float))
        self.evaluations += 1
        self._t = t
        self.y_window.appendleft(np.asarray(y, dtype=float).copy())
        self.u_window.appendleft(u.copy())
        self._y = y
        self._pending = None
        return u

    def next_state(self):
        """``x_c(t+1)`` given everything seen up to ``t``."""
        if self._pending is None:
            if self._t + 1 < self.switch_time:
                self._pending = np.asarray(self.warmup.dynamics(self.state, self._y), dtype=float)
            else:
                yw, uw = self.windows()
                self._pending = compose_fo_N(self.observer, yw, uw)
        return self._pending


def arx_step(ctrl, t, y_t):
    return ctrl.step(t, y_t)


@dataclass
class PerturbationReport:
    e_c_traj: Trajectory
    sup_e_c: float
    bound_delta: float
    satisfied: bool = field(init=False)

    def __post_init__(self):
        self.satisfied = bool(self.sup_e_c <= self.bound_delta)

    def to_dict(self):
        return {
            "sup_e_c": self.sup_e_c,
            "bound_delta": None if math.isinf(self.bound_delta) else self.bound_delta,
            "satisfied": self.satisfied,
            "horizon": len(self.e_c_traj),
            "e_c": self.e_c_traj.samples.tolist(),
        }


def implied_perturbation(record, controller, delta=math.inf):
    """Recompute ``e_c(t) = x_c(t+1) - f_c(x_c(t), y(t))`` from a record."""
    if record.ctrl_state_traj is None or record.final_ctrl_state is None:
        raise ValueError("record has no controller-state trajectory")
    xc = record.ctrl_state_traj.samples
    y = record.output_traj.samples
    nxt = np.vstack([xc[1:], record.final_ctrl_state[None, :]])
    ec = np.array([nxt[t] - np.asarray(controller.dynamics(xc[t], y[t]), dtype=float)
                   for t in range(len(xc))])
    traj = Trajectory(ec, record.ctrl_state_traj.start_time)
    return PerturbationReport(traj, float(np.max(np.abs(ec))) if ec.size else 0.0, float(delta))


def order_from_bound(decay, fbar, delta):
    """Smallest ``N >= 1`` with ``gain * rate**N * fbar <= delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not math.isfinite(fbar):
        raise ArithmeticError("bound on ||f_o(0, y, u)|| is not finite")
    if fbar <= 0:
        return 1
    n = max(1, math.ceil(math.log(delta / (decay.gain * fbar)) / math.log(decay.rate)))
    while decay(fbar, n) > delta:
        n += 1
    while n > 1 and decay(fbar, n - 1) <= delta:
        n -= 1
    return n


def max_fo_at_zero(observer, radius, resolution=GRID_POINTS_PER_AXIS):
    """Grid maximum of ``||f_o(0, y, u)||`` over ``||[y, u]|| <= radius``.

    The grid includes the box corners. If ``resolution**d`` would exceed
    ``MAX_GRID_POINTS`` the per-axis resolution is reduced (keeping it odd).
    """
    ny, nu = observer.measurement_dim, observer.control_dim
    d = ny + nu
    res = resolution
    while res > 3 and res ** d > MAX_GRID_POINTS:
        res -= 2
    axis = np.linspace(-radius, radius, res)
    x0 = np.zeros(observer.state_dim)
    best = 0.0
    for p in np.array(np.meshgrid(*([axis] * d), indexing="ij")).reshape(d, -1).T:
        v = float(np.max(np.abs(observer(x0, p[:ny], p[ny:]))))
        if not math.isfinite(v):
            raise ArithmeticError(f"f_o(0, y, u) is not finite at y={p[:ny]}, u={p[ny:]}")
        best = max(best, v)
    return best


def select_order_N(decay, observer, M, epsilon, gamma_inverse, resolution=GRID_POINTS_PER_AXIS):
    """Order ``N`` such that ``beta(max ||f_o(0, y, u)||, N) <= gamma_inverse(epsilon)``."""
    if decay is None:
        raise ValueError("a decay certificate is required")
    if not 0.0 < decay.rate < 1.0:
        raise ValueError("decay rate must lie in (0, 1)")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    fbar = max_fo_at_zero(observer, M + epsilon, resolution)
    return order_from_bound(decay, fbar, gamma_inverse(epsilon))


def fir_direct(controller, decay, N, switch_time=None):
    """ARX controller that composes ``f_c`` itself (no input window used).

    Only meaningful when the controller is contractive on its own; for an
    unstable ``f_c`` the construction is allowed but the perturbation grows.
    """
    if N < 1:
        raise ValueError("order N must be >= 1")
    observer = ObserverForm(
        map=lambda x, y, u: controller.dynamics(x, y),
        state_dim=controller.state_dim,
        decay=decay,
        measurement_dim=controller.input_dim,
        control_dim=controller.output_dim,
    )
    return ArxController(observer, controller.output, N, controller, switch_time)


def observer_controller(observer, output_map, output_dim):
    """The nominal controller implied by an observer form: ``f_c(x, y) = f_o(x, y, h_c(x))``."""
    return ControllerModel(
        dynamics=lambda x, y: observer(x, y, np.atleast_1d(output_map(x))),
        output=output_map,
        state_dim=observer.state_dim,
        input_dim=observer.measurement_dim,
        output_dim=output_dim,
    )
