"""Command-line entry point: ``arxform simulate|sweep|spectral|encrypted-demo``.

Exit codes: 0 success, 2 configuration error, 3 numerical diagnostic,
4 runtime divergence.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import (
    ConfigError,
    atomic_write_text,
    load_system,
    write_csv,
    write_trajectory_csv,
)
from .core_sim import Trajectory, max_deviation, nominal_bound_M, simulate_closed_loop
from .depth_budget import BudgetPolicy, encrypted_arx_run, evaluate_recursive_encrypted
from .errors import (
    ConvergenceRegionError,
    DepthExhausted,
    NonFiniteError,
    SingularMatrixError,
    UnstableError,
)
from .linear_analysis import (
    DEFAULT_OMEGA_GRID,
    build_closed_loop,
    fir_coefficients,
    frequency_sup_bound,
    frequency_sweep,
    norm_inf,
    order_bound_linear,
    simulate_linear_arx,
    delta_N,
)
from .observer_arx import implied_perturbation
from .robot_bench import PUBLISHED_FIG2, SweepPoint
from .svg import line_chart

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGENCE = 0, 2, 3, 4


@dataclass
class RunConfig:
    system: str = "flexible_joint"
    order: Optional[int] = None
    order_range: Optional[tuple] = None
    epsilon: Optional[float] = None
    horizon: Optional[int] = None
    switch_time: Optional[int] = None
    depth: int = 4
    omega_grid: int = DEFAULT_OMEGA_GRID
    out: str = "out"
    format: str = "csv"


def parse_range(text):
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from exc
    if not 1 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"need 1 <= A <= B, got {text!r}")
    return lo, hi


def _resolve(system, cfg, default_order=10):
    N = cfg.order if cfg.order is not None else (system.order or default_order)
    switch = cfg.switch_time if cfg.switch_time is not None else (
        system.switch_time if system.switch_time is not None else max(N, 20))
    horizon = cfg.horizon if cfg.horizon is not None else system.horizon
    if N < 1:
        raise ConfigError("must be >= 1", "--order")
    if horizon < 1:
        raise ConfigError("must be >= 1", "--horizon")
    if horizon < switch:
        raise ConfigError(f"horizon {horizon} is shorter than switch time {switch}", "--horizon")
    return N, switch, horizon


def _emit(summary):
    print(json.dumps(summary, indent=2, default=float))


def _state_names(system):
    p, c = system.plant, system.controller
    return ([f"x_p_{i}" for i in range(p.state_dim)] + [f"x_c_{i}" for i in range(c.state_dim)]
            + [f"u_{i}" for i in range(p.input_dim)] + [f"y_{i}" for i in range(p.output_dim)])


def _record_traj(rec):
    return Trajectory(np.hstack([rec.plant_traj.samples, rec.ctrl_state_traj.samples,
                                 rec.input_traj.samples, rec.output_traj.samples]))


def evaluate_order(system, N, switch, horizon, nominal=None):
    """Deviation metrics for one ARX order of a loaded system."""
    import time

    if nominal is None:
        nominal = simulate_closed_loop(system.plant, system.controller, system.x_p0, system.x_c0, horizon)
    start = time.perf_counter()
    rec = simulate_closed_loop(system.plant, system.arx_controller(N, switch), system.x_p0,
                               system.x_c0, horizon)
    runtime = time.perf_counter() - start
    report = implied_perturbation(rec, system.controller)
    point = SweepPoint(
        N=int(N),
        max_plant_deviation=max_deviation(rec.plant_traj, nominal.plant_traj, norm=2),
        max_plant_deviation_inf=max_deviation(rec.plant_traj, nominal.plant_traj),
        max_stacked_deviation=max_deviation(rec.stacked(), nominal.stacked()),
        sup_e_c=report.sup_e_c,
        sup_e_c_arx=float(np.max(np.abs(report.e_c_traj.samples[switch:]), initial=0.0)),
        runtime=runtime,
    )
    return point, rec, report


def _sweep_worker(args):
    source, N, switch, horizon = args
    system = load_system(source)
    return evaluate_order(system, N, switch, horizon)[0]


def cmd_simulate(cfg):
    system = load_system(cfg.system)
    N, switch, horizon = _resolve(system, cfg)
    out = Path(cfg.out)
    nominal = simulate_closed_loop(system.plant, system.controller, system.x_p0, system.x_c0, horizon)
    point, rec, report = evaluate_order(system, N, switch, horizon, nominal)
    names = _state_names(system)
    write_trajectory_csv(out / "nominal.csv", _record_traj(nominal), names)
    write_trajectory_csv(out / f"arxc_N{N}.csv", _record_traj(rec), names)
    ny = system.plant.output_dim
    fig_names = ([f"nominal_y{i + 1}" for i in range(ny)] + [f"N{N}_y{i + 1}" for i in range(ny)])
    write_trajectory_csv(out / "figure1.csv",
                         Trajectory(np.hstack([nominal.output_traj.samples, rec.output_traj.samples])),
                         fig_names)
    files = ["nominal.csv", f"arxc_N{N}.csv", "figure1.csv", "perturbation.json"]
    atomic_write_text(out / "perturbation.json", json.dumps(report.to_dict()))
    if cfg.format == "svg":
        t = nominal.output_traj.times
        series = [(f"nominal y{i + 1}", t, nominal.output_traj.samples[:, i]) for i in range(ny)]
        series += [(f"N={N} y{i + 1}", t, rec.output_traj.samples[:, i]) for i in range(ny)]
        atomic_write_text(out / "figure1.svg", line_chart(series, "Plant outputs", "t", "y"))
        files.append("figure1.svg")
    summary = {"command": "simulate", "system": system.name, "order": N, "switch_time": switch,
               "horizon": horizon, "nominal_bound_M": nominal_bound_M(nominal), **asdict(point),
               "out": str(out), "files": files}
    if cfg.epsilon is not None:
        summary["epsilon"] = cfg.epsilon
        summary["within_epsilon"] = point.max_plant_deviation_inf <= cfg.epsilon
    _emit(summary)
    return EXIT_OK


def cmd_sweep(cfg):
    system = load_system(cfg.system)
    lo, hi = cfg.order_range or (5, 15)
    cfg_hi = RunConfig(**{**asdict(cfg), "order": hi})
    _, switch, horizon = _resolve(system, cfg_hi)
    if switch < hi:
        raise ConfigError(f"switch time {switch} is below the largest order {hi}", "--switch")
    orders = list(range(lo, hi + 1))
    workers = max(1, int(os.environ.get("ARX_SEED_THREADS", "1") or 1))
    if workers > 1 and len(orders) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(orders))) as pool:
            points = list(pool.map(_sweep_worker, [(cfg.system, N, switch, horizon) for N in orders]))
    else:
        nominal = simulate_closed_loop(system.plant, system.controller, system.x_p0, system.x_c0, horizon)
        points = [evaluate_order(system, N, switch, horizon, nominal)[0] for N in orders]
    out = Path(cfg.out)
    write_csv(out / "figure2.csv", ["N", "max_dev", "sup_ec", "max_dev_inf", "max_dev_stacked", "sup_ec_arx"],
              [[p.N, p.max_plant_deviation, p.sup_e_c, p.max_plant_deviation_inf,
                p.max_stacked_deviation, p.sup_e_c_arx] for p in points])
    svg = line_chart([("max_t ||x_p - xbar_p||", orders, [p.max_plant_deviation for p in points])],
                     "Maximum error with respect to the order N", "N", "max deviation", markers=True)
    atomic_write_text(out / "figure2.svg", svg)
    files = ["figure2.csv", "figure2.svg"]
    if cfg.format == "json":
        atomic_write_text(out / "figure2.json", json.dumps([asdict(p) for p in points]))
        files.append("figure2.json")
    summary = {"command": "sweep", "system": system.name, "switch_time": switch, "horizon": horizon,
               "points": [asdict(p) for p in points], "out": str(out), "files": files}
    if system.name == "flexible_joint" and switch == 20 and horizon == 300:
        summary["published_ratio"] = {p.N: p.max_plant_deviation / PUBLISHED_FIG2[p.N]
                                      for p in points if p.N in PUBLISHED_FIG2}
    _emit(summary)
    return EXIT_OK


def _linear_parts(system):
    if system.linear_plant is None:
        raise ConfigError("system has no linear description", "--system")
    notes = ["nonlinearity dropped (linearization)"] if system.linearized else []
    return system.linear_plant, system.linear_controller, notes


def cmd_spectral(cfg):
    system = load_system(cfg.system)
    lp, lc, notes = _linear_parts(system)
    N, _, horizon = _resolve(system, RunConfig(**{**asdict(cfg), "switch_time": cfg.switch_time or 0}))
    eps = cfg.epsilon if cfg.epsilon is not None else 0.1
    x0 = np.concatenate([system.x_p0, system.x_c0])
    cl = build_closed_loop(lp, lc, x0)
    omegas, norms = frequency_sweep(cl, lc, N, cfg.omega_grid)
    sup = frequency_sup_bound(cl, lc, N, cfg.omega_grid, check_region=False)
    run = simulate_linear_arx(lp, lc, N, system.x_p0, system.x_c0, horizon, switch_time=N)
    td = max_deviation(np.hstack([run.arx.plant_traj.samples, run.arx.ctrl_state_traj.samples]),
                       np.hstack([run.nominal.plant_traj.samples, run.nominal.ctrl_state_traj.samples]))
    M = nominal_bound_M(run.nominal)
    decay = lc.decay()
    n_bound = order_bound_linear(lc, M, eps, cl.gamma, decay)
    coeffs = fir_coefficients(lc, N)
    out = Path(cfg.out)
    write_csv(out / "frequency.csv", ["omega", "norm_E"], zip(omegas, norms))
    atomic_write_text(out / "fir_coefficients.json", json.dumps(
        {"N": N, "y_coeffs": coeffs.y_coeffs.tolist(), "u_coeffs": coeffs.u_coeffs.tolist()}))
    files = ["frequency.csv", "fir_coefficients.json"]
    if cfg.format == "svg":
        atomic_write_text(out / "frequency.svg",
                          line_chart([("||E(e^jw)||", omegas, norms)], f"Error transfer, N={N}", "omega", "norm"))
        files.append("frequency.svg")
    if system.x_c0.any():
        notes.append("x_c0 != 0: the z-domain error model ignores the switching jump at t = N - 1")
    _emit({"command": "spectral", "system": system.name, "order": N, "epsilon": eps,
           "sup_bound": sup, "time_domain_max_deviation": td, "bound_holds": sup >= td,
           "M": M, "gamma": cl.gamma, "delta": eps / cl.gamma,
           "closed_loop_envelope": {"M_cl": cl.spectral.gain, "lambda_cl": cl.spectral.rate},
           "observer_envelope": {"M_o": decay.gain, "lambda_o": decay.rate},
           "order_bound_linear": n_bound, "delta_N_norm": norm_inf(delta_N(lc, lp.C, N)),
           "notes": notes, "out": str(out), "files": files})
    return EXIT_OK


def cmd_encrypted_demo(cfg):
    system = load_system(cfg.system)
    lp, lc, notes = _linear_parts(system)
    N, switch, horizon = _resolve(system, cfg)
    policy = BudgetPolicy(cfg.depth)
    reports, us, ys = encrypted_arx_run(lp, lc, N, system.x_p0, system.x_c0, horizon, policy, switch)
    failure = evaluate_recursive_encrypted(lc, ys, policy)
    depths = sorted({r["depth_used"] for r in reports})
    ops = sorted({r["op_count"] for r in reports})
    out = Path(cfg.out)
    doc = {"policy": {"initial_depth": policy.initial_depth, "scale_bits": policy.scale_bits},
           "arx": {"order": N, "switch_time": switch, "steps": reports},
           "recursive": {"failure_step": failure, "horizon": horizon}}
    atomic_write_text(out / "budget_report.json", json.dumps(doc))
    _emit({"command": "encrypted-demo", "system": system.name, "order": N, "initial_depth": cfg.depth,
           "arx_steps": len(reports), "arx_depth_used": depths, "arx_op_count": ops,
           "arx_constant_budget": len(depths) <= 1 and len(ops) <= 1,
           "arx_max_error_over_noise": max((r["error"] / r["noise"] for r in reports), default=0.0),
           "recursive_failure_step": failure, "notes": notes, "out": str(out),
           "files": ["budget_report.json"]})
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "spectral": cmd_spectral,
    "encrypted-demo": cmd_encrypted_demo,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", default="flexible_joint",
                        help="builtin name (flexible_joint, flexible_joint_linear, deadbeat2) or JSON file")
    common.add_argument("--order", type=int, help="ARX order N")
    common.add_argument("--order-range", type=parse_range, help="N range A..B (sweep)")
    common.add_argument("--epsilon", type=float, help="target deviation bound")
    common.add_argument("--horizon", type=int, help="number of simulated steps")
    common.add_argument("--switch", type=int, dest="switch_time", help="switch time to the ARX controller")
    common.add_argument("--depth", type=int, default=4, help="initial multiplicative depth")
    common.add_argument("--omega-grid", type=int, default=DEFAULT_OMEGA_GRID, help="frequency grid size")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--format", choices=["csv", "json", "svg"], default="csv")
    parser = argparse.ArgumentParser(prog="arxform", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig(system=args.system, order=args.order, order_range=args.order_range,
                    epsilon=args.epsilon, horizon=args.horizon, switch_time=args.switch_time,
                    depth=args.depth, omega_grid=args.omega_grid, out=args.out, format=args.format)
    try:
        if cfg.depth < 0:
            raise ConfigError("must be >= 0", "--depth")
        if cfg.omega_grid < 64:
            raise ConfigError("must be >= 64", "--omega-grid")
        return COMMANDS[args.command](cfg)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"arxform: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceRegionError, SingularMatrixError, UnstableError, DepthExhausted) as exc:
        print(f"arxform: numerical diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NonFiniteError as exc:
        print(f"arxform: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValueError as exc:
        print(f"arxform: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
