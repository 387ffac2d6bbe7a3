"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from arxform import kernels
from arxform.robot_bench import RobotConfig, robot_linearization


def cases():
    rng = np.random.default_rng(0)
    lp, lc = robot_linearization(RobotConfig())
    Fo, G, R = lc.observer_matrix, lc.G, lc.R
    A8 = rng.normal(size=(8, 8)) * 0.3
    Mr, Mi = rng.normal(size=(8, 8)) + 5 * np.eye(8), rng.normal(size=(8, 8))
    b = rng.normal(size=8)
    N = 15
    yw, uw = rng.normal(size=(N, 2)), rng.normal(size=(N, 1))
    P = [np.linalg.matrix_power(Fo, k) for k in range(N)]
    yc, uc = np.array([p @ G for p in P]), np.array([p @ R for p in P])
    return {
        "power_norms 8x8, k<=512": lambda k: k.power_norms(A8, 512),
        "solve_split 8x8 complex": lambda k: k.solve_split(Mr, Mi, b, b),
        "affine_compose robot N=15": lambda k: k.affine_compose(Fo, G, R, yw, uw),
        "fir_sum robot N=15": lambda k: k.fir_sum(yc, uc, yw, uw),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled backend not built; only the fallback is timed")
    results = []
    for name, fn in cases().items():
        row = {"kernel": name}
        for backend, mod in sorted(kernels.BACKENDS.items()):
            t = timeit.Timer(lambda: fn(mod))
            n, _ = t.autorange()
            row[backend] = min(t.repeat(args.repeat, n)) / n
        results.append(row)
    print(f"{'kernel':32s} {'python [us]':>12s} {'cython [us]':>12s} {'speedup':>8s}")
    for row in results:
        py, cy = row["python"] * 1e6, row.get("cython", float("nan")) * 1e6
        print(f"{row['kernel']:32s} {py:12.1f} {cy:12.1f} {py / cy:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
