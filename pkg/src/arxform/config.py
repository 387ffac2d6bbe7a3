"""System definitions (builtin or JSON), CSV trajectories and small file helpers.

JSON layout::

    {
      "plant": {"A": ..., "B": ..., "C": ..., "nonlinearity": "flexible_joint_sine"},
      "controller": {"F": ..., "G": ..., "H": ..., "R": ...}
                 or {"observer_based": {"L": ..., "K": ...}},
      "x_p0": [...], "x_c0": [...], "horizon": 300,
      "arxc": {"order": 10, "switch_time": 20, "decay": {"M_o": 2.0, "lambda_o": 0.9}}
    }

A matrix is a nested row list, ``{"shape": [r, c], "data": [...row-major...]}``,
or a path (relative to the JSON file) of a headerless CSV.
"""

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core_sim import ControllerModel, PlantModel, Trajectory
from .linear_analysis import LinearController, LinearPlant, observer_based_map
from .observer_arx import ArxController, KLDecay, ObserverForm
from .robot_bench import RobotConfig, build_robot, flexible_joint_sine, robot_linearization


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


NONLINEARITIES = {
    "flexible_joint_sine": flexible_joint_sine,
}


@dataclass
class SystemDefinition:
    name: str
    plant: PlantModel
    controller: ControllerModel
    observer: ObserverForm
    x_p0: np.ndarray
    x_c0: np.ndarray
    horizon: int = 300
    order: Optional[int] = None
    switch_time: Optional[int] = None
    decay: Optional[KLDecay] = None
    linear_plant: Optional[LinearPlant] = None
    linear_controller: Optional[LinearController] = None
    linearized: bool = False
    source: str = ""
    notes: list = field(default_factory=list)

    @property
    def is_linear(self):
        return self.linear_plant is not None and not self.linearized

    def arx_controller(self, N, switch_time):
        obs = self.observer
        if self.decay is not None:
            obs = ObserverForm(obs.map, obs.state_dim, self.decay, obs.measurement_dim,
                               obs.control_dim, obs.linear)
        return ArxController(obs, self.controller.output, N, self.controller, switch_time)


def deadbeat_pair():
    """Double-integrator plant with a deadbeat observer-based controller.

    ``L`` and ``K`` place every eigenvalue of ``A - L C`` and ``A + B K`` at
    zero, so all controller matrices are integers and ``(A - L C)^2 = 0``.
    """
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    L = np.array([[2.0], [1.0]])
    K = np.array([[-1.0, -2.0]])
    return LinearPlant(A, B, C), observer_based_map(A, L, C, B, K)


def _from_linear(name, plant, ctrl, x_p0, x_c0, horizon=300, **kw):
    return SystemDefinition(
        name=name,
        plant=plant.to_model(),
        controller=ctrl.to_model(),
        observer=ctrl.observer_form(),
        x_p0=np.asarray(x_p0, dtype=float),
        x_c0=np.asarray(x_c0, dtype=float),
        horizon=horizon,
        linear_plant=plant,
        linear_controller=ctrl,
        **kw,
    )


def builtin_system(name):
    if name in ("flexible_joint", "flexible_joint_sine"):
        cfg = RobotConfig()
        plant, controller, observer = build_robot(cfg)
        lp, lc = robot_linearization(cfg)
        return SystemDefinition(
            name="flexible_joint", plant=plant, controller=controller, observer=observer,
            x_p0=cfg.x_p0, x_c0=cfg.x_c0, horizon=cfg.horizon, order=10,
            switch_time=cfg.switch_time, linear_plant=lp, linear_controller=lc,
            linearized=True, source="builtin")
    if name == "flexible_joint_linear":
        cfg = RobotConfig()
        lp, lc = robot_linearization(cfg)
        return _from_linear("flexible_joint_linear", lp, lc, cfg.x_p0, cfg.x_c0, cfg.horizon,
                            order=10, switch_time=cfg.switch_time, source="builtin")
    if name == "deadbeat2":
        lp, lc = deadbeat_pair()
        return _from_linear("deadbeat2", lp, lc, [1.0, -0.5], [0.0, 0.0], 300,
                            order=2, switch_time=2, source="builtin")
    raise ConfigError(f"unknown builtin system {name!r}", "system")


BUILTIN_SYSTEMS = ("flexible_joint", "flexible_joint_linear", "deadbeat2")


def load_matrix(value, base_dir=".", field_name="matrix"):
    try:
        if isinstance(value, str):
            path = Path(base_dir) / value
            if not path.exists():
                raise ConfigError(f"matrix file {str(path)!r} not found", field_name)
            M = np.loadtxt(path, delimiter=",", ndmin=2)
        elif isinstance(value, dict):
            r, c = value["shape"]
            data = value["data"]
            if len(data) != r * c:
                raise ConfigError(f"expected {r * c} entries for shape {r}x{c}, got {len(data)}", field_name)
            M = np.asarray(data, dtype=float).reshape(r, c)
        else:
            M = np.atleast_2d(np.asarray(value, dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse matrix ({exc})", field_name) from exc
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise ConfigError("matrix must be 2-D and finite", field_name)
    return M


def _vector(value, dim, field_name):
    try:
        v = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse vector ({exc})", field_name) from exc
    if v.shape[0] != dim:
        raise ConfigError(f"expected {dim} entries, got {v.shape[0]}", field_name)
    return v


def parse_system(doc, base_dir=".", name="config"):
    """Build a :class:`SystemDefinition` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    if "plant" not in doc:
        raise ConfigError("missing", "plant")
    if "controller" not in doc:
        raise ConfigError("missing", "controller")
    p = doc["plant"]
    A = load_matrix(p.get("A"), base_dir, "plant.A")
    B = load_matrix(p.get("B"), base_dir, "plant.B")
    C = load_matrix(p.get("C"), base_dir, "plant.C")
    try:
        lp = LinearPlant(A, B, C)
    except ValueError as exc:
        raise ConfigError(str(exc), "plant") from exc
    n, nu, ny = lp.dims
    nl_name = p.get("nonlinearity")
    if nl_name is not None and nl_name not in NONLINEARITIES:
        raise ConfigError(f"unknown nonlinearity {nl_name!r}; known: {sorted(NONLINEARITIES)}",
                          "plant.nonlinearity")
    c = doc["controller"]
    try:
        if "observer_based" in c:
            ob = c["observer_based"]
            L = load_matrix(ob.get("L"), base_dir, "controller.observer_based.L")
            K = load_matrix(ob.get("K"), base_dir, "controller.observer_based.K")
            lc = observer_based_map(A, L, C, B, K)
        else:
            mats = [load_matrix(c.get(k), base_dir, f"controller.{k}") for k in "FGHR"]
            lc = LinearController(*mats)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "controller") from exc
    nc = lc.dims[0]
    x_p0 = _vector(doc.get("x_p0", np.zeros(n)), n, "x_p0")
    x_c0 = _vector(doc.get("x_c0", np.zeros(nc)), nc, "x_c0")
    horizon = int(doc.get("horizon", 300))
    arxc = doc.get("arxc", {}) or {}
    decay = None
    if "decay" in arxc:
        try:
            decay = KLDecay(float(arxc["decay"]["M_o"]), float(arxc["decay"]["lambda_o"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "arxc.decay") from exc
    kw = dict(order=arxc.get("order"), switch_time=arxc.get("switch_time"), decay=decay, source=name)
    if nl_name is None:
        return _from_linear(name, lp, lc, x_p0, x_c0, horizon, **kw)

    if "observer_based" not in c:
        raise ConfigError("a nonlinearity requires an observer_based controller", "controller")
    f = NONLINEARITIES[nl_name]
    H = lc.H
    plant = PlantModel(lambda x, u: A @ x + f(x) + B @ u, lambda x: C @ x, n, nu, ny)
    L = lc.G

    def fo(x, y, u):
        return A @ x + f(x) + B @ u + L @ (y - C @ x)

    controller = ControllerModel(lambda x, y: A @ x + f(x) + B @ (H @ x) + L @ (y - C @ x),
                                 lambda x: H @ x, nc, ny, nu)
    observer = ObserverForm(fo, nc, decay, ny, nu)
    return SystemDefinition(name=name, plant=plant, controller=controller, observer=observer,
                            x_p0=x_p0, x_c0=x_c0, horizon=horizon, linear_plant=lp,
                            linear_controller=lc, linearized=True, **kw)


def load_system(source):
    """A builtin system name or the path of a JSON system file."""
    if source in BUILTIN_SYSTEMS or source == "flexible_joint_sine":
        return builtin_system(source)
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"system file {source!r} not found")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_system(doc, path.parent, name=path.stem)


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    """Write rows with ``repr`` formatting so floats round-trip exactly."""
    atomic_write_text(path, _csv_text(header, rows))


def write_trajectory_csv(path, traj, names=None):
    names = list(names or traj.names or [f"x_{i}" for i in range(traj.dim)])
    rows = ([t] + list(row) for t, row in zip(traj.times, traj.samples))
    write_csv(path, ["t"] + names, rows)


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "t":
            raise ConfigError("trajectory CSV must start with a 't' column", str(path))
        rows = [r for r in reader if r]
    t = np.array([int(r[0]) for r in rows])
    if t.size and np.any(np.diff(t) != 1):
        raise ConfigError("time column is not contiguous", str(path))
    data = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(rows), len(header) - 1)
    return Trajectory(data, int(t[0]) if t.size else 0, names=header[1:])


def read_csv_columns(path):
    """CSV with header as ``{column: np.ndarray}``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {h: [] for h in header}
        for r in reader:
            for h, v in zip(header, r):
                cols[h].append(float(v))
    return {h: np.array(v) for h, v in cols.items()}
