"""Discrete-time closed-loop simulation of a plant and a dynamic controller.

The plant is ``x_p(t+1) = f_p(x_p(t), u(t)), y(t) = h_p(x_p(t))`` and the
controller ``x_c(t+1) = f_c(x_c(t), y(t)) + e_c(t), u(t) = h_c(x_c(t))``.
Any object following :class:`FeedbackController` can close the loop; a plain
:class:`ControllerModel` is wrapped in :class:`RecursiveController`, which is
the nominal case ``e_c = 0``.

All norms are infinity norms unless a caller explicitly asks for another one.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .errors import DimensionError, NonFiniteError


def as_vector(x, dim=None, name="vector"):
    """Return ``x`` as a 1-D float array, checking its length and finiteness."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


@dataclass
class Trajectory:
    """Time-indexed samples, one row per step starting at ``start_time``."""

    samples: np.ndarray
    start_time: int = 0
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise DimensionError(f"trajectory samples must be 2-D, got shape {s.shape}")
        if self.start_time < 0:
            raise ValueError("start_time must be nonnegative")
        self.samples = s
        if self.names is not None and len(self.names) != s.shape[1]:
            raise DimensionError("number of names does not match trajectory dimension")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def times(self):
        return np.arange(self.start_time, self.start_time + len(self))

    def __getitem__(self, t):
        return self.samples[t - self.start_time]


@dataclass
class PlantModel:
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    output: Callable[[np.ndarray], np.ndarray]
    state_dim: int
    input_dim: int
    output_dim: int


@dataclass
class ControllerModel:
    """``x_c(t+1) = dynamics(x_c, y)``, ``u = output(x_c)``."""

    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    output: Callable[[np.ndarray], np.ndarray]
    state_dim: int
    input_dim: int
    output_dim: int


class FeedbackController(Protocol):
    """What :func:`simulate_closed_loop` needs from a controller.

    ``step(t, y)`` is called with ``t = 0, 1, 2, ...`` and returns ``u(t)``;
    afterwards ``state`` is the ``x_c(t)`` that produced it and
    ``next_state()`` gives ``x_c(t+1)``. ``reference`` is the nominal
    :class:`ControllerModel` against which perturbations are measured.
    """

    reference: ControllerModel
    state: np.ndarray

    def reset(self, x_c0: np.ndarray) -> None: ...

    def step(self, t: int, y: np.ndarray) -> np.ndarray: ...

    def next_state(self) -> np.ndarray: ...


class RecursiveController:
    """Runs a :class:`ControllerModel` by plain state recursion."""

    def __init__(self, model):
        self.reference = model
        self.state = None
        self._y = None
        self._t = -1

    def reset(self, x_c0):
        self._x0 = as_vector(x_c0, self.reference.state_dim, "x_c0")
        self.state = None
        self._pending = None
        self._t = -1

    def step(self, t, y):
        if t != self._t + 1:
            raise ValueError(f"controller stepped at t={t}, expected t={self._t + 1}")
        self.state = self._x0 if t == 0 else self.next_state()
        self._t = t
        self._y = y
        self._pending = None
        return np.asarray(self.reference.output(self.state), dtype=float)

    def next_state(self):
        if self._pending is None:
            self._pending = np.asarray(self.reference.dynamics(self.state, self._y), dtype=float)
        return self._pending


@dataclass
class ClosedLoopRecord:
    """Everything recorded along one closed-loop run (rows are t = 0..horizon-1).

    ``final_ctrl_state`` is ``x_c(horizon)``, which the perturbation at the
    last step needs.
    """

    plant_traj: Trajectory
    ctrl_state_traj: Optional[Trajectory]
    input_traj: Trajectory
    output_traj: Trajectory
    perturbation_traj: Optional[Trajectory]
    final_ctrl_state: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return len(self.plant_traj)

    def stacked(self):
        """Rows ``[x_c, x_p, u, y]`` as in the nominal bound."""
        parts = [self.ctrl_state_traj.samples] if self.ctrl_state_traj is not None else []
        parts += [self.plant_traj.samples, self.input_traj.samples, self.output_traj.samples]
        return Trajectory(np.hstack(parts))


def _check_finite(v, t, what):
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(t, what)


def simulate_closed_loop(plant, controller, x_p0, x_c0, horizon):
    """Simulate ``horizon`` steps of the plant in feedback with ``controller``.

    ``controller`` is a :class:`ControllerModel` (nominal run) or any
    :class:`FeedbackController`. Raises :class:`NonFiniteError` carrying the
    step index as soon as any signal stops being finite.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(controller, ControllerModel):
        controller = RecursiveController(controller)
    ref = controller.reference
    if ref.input_dim != plant.output_dim or ref.output_dim != plant.input_dim:
        raise DimensionError(
            f"controller maps R^{ref.input_dim} -> R^{ref.output_dim} but plant maps "
            f"R^{plant.input_dim} -> R^{plant.output_dim}")
    xp = as_vector(x_p0, plant.state_dim, "x_p0")
    controller.reset(as_vector(x_c0, ref.state_dim, "x_c0"))

    XP = np.empty((horizon, plant.state_dim))
    XC = np.empty((horizon, ref.state_dim))
    U = np.empty((horizon, plant.input_dim))
    Y = np.empty((horizon, plant.output_dim))
    EC = np.empty((horizon, ref.state_dim))
    with np.errstate(over="ignore", invalid="ignore"):
        _run_loop(plant, controller, ref, xp, horizon, XP, XC, U, Y, EC)
    return ClosedLoopRecord(
        plant_traj=Trajectory(XP),
        ctrl_state_traj=Trajectory(XC),
        input_traj=Trajectory(U),
        output_traj=Trajectory(Y),
        perturbation_traj=Trajectory(EC),
        final_ctrl_state=controller.next_state().copy(),
    )


def _run_loop(plant, controller, ref, xp, horizon, XP, XC, U, Y, EC):
    # overflow shows up as non-finite values, which are reported with their step
    for t in range(horizon):
        y = np.asarray(plant.output(xp), dtype=float).reshape(plant.output_dim)
        _check_finite(y, t, "plant output")
        u = np.asarray(controller.step(t, y), dtype=float).reshape(plant.input_dim)
        xc = controller.state
        _check_finite(xc, t, "controller state")
        _check_finite(u, t, "control input")
        XP[t], XC[t], U[t], Y[t] = xp, xc, u, y
        xc_next = controller.next_state()
        _check_finite(xc_next, t + 1, "controller state")
        EC[t] = xc_next - np.asarray(ref.dynamics(xc, y), dtype=float)
        xp = np.asarray(plant.dynamics(xp, u), dtype=float).reshape(plant.state_dim)
        _check_finite(xp, t + 1, "plant state")


def sup_norm(traj):
    """Largest absolute entry over all samples."""
    s = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if s.size == 0:
        raise ValueError("sup_norm of an empty trajectory")
    return float(np.max(np.abs(s)))


def max_deviation(a, b, norm="inf"):
    """``max_t ||a(t) - b(t)||``; ``norm`` is ``"inf"`` (default) or ``2``."""
    sa = a.samples if isinstance(a, Trajectory) else np.asarray(a, dtype=float)
    sb = b.samples if isinstance(b, Trajectory) else np.asarray(b, dtype=float)
    if sa.shape != sb.shape:
        raise DimensionError(f"trajectory shapes differ: {sa.shape} vs {sb.shape}")
    if sa.size == 0:
        raise ValueError("max_deviation of empty trajectories")
    d = sa - sb
    if norm in ("inf", np.inf):
        return float(np.max(np.abs(d)))
    if norm == 2:
        return float(np.max(np.sqrt(np.sum(d * d, axis=1))))
    raise ValueError(f"unsupported norm {norm!r}")


def nominal_bound_M(record):
    """Sup over time of ``||[x_c, x_p, u, y]||`` for a nominal record."""
    if record.perturbation_traj is not None and np.any(record.perturbation_traj.samples != 0.0):
        raise ValueError("record has a nonzero perturbation; the nominal bound needs a nominal run")
    return sup_norm(record.stacked())
