"""Numba kernels versus their numpy twins, plus one end-to-end solve per backend.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Kernel timings use the compiled functions directly (compilation is excluded by
a warm-up call).  The end-to-end solve is run in a subprocess per backend,
because the backend is fixed at import time by ``RGBDSDE_NUMBA``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from rgbdsde import _kernels
from rgbdsde.regression import monomial_exponents

SOLVE_SNIPPET = """
import time
from rgbdsde import _kernels
from rgbdsde.coefficients import build_coefficients, ramp_obstacle
from rgbdsde.domain import Interval
from rgbdsde.solver import SolverConfig, solve_reflected
from rgbdsde.pde_oracle import FdMesh, solve_obstacle_pde_1d
c = build_coefficients("neumann_heat")
ob = ramp_obstacle(0.3, 1.0)
cfg = SolverConfig(N=64, M_inner=4096, degree=2, seed=1)
solve_reflected(c, ob, Interval(0, 1), config=cfg.with_(N=4, M_inner=64))  # warm-up
t = time.perf_counter()
sol = solve_reflected(c, ob, Interval(0, 1), config=cfg, x0=[0.5])
mc = time.perf_counter() - t
t = time.perf_counter()
solve_obstacle_pde_1d(c, ob, FdMesh(0.0, 1.0, 256, 200, 1.0))
fd = time.perf_counter() - t
print(_kernels.BACKEND, mc, fd, "%.12f" % float(sol.Y.mean()))
"""


def cases(rng):
    n = 4096
    x = rng.uniform(-0.5, 1.5, n)
    pts = rng.normal(size=(n, 3))
    J = 257
    lower, upper = -rng.uniform(0, 1, J), -rng.uniform(0, 1, J)
    diag = 3.0 + rng.uniform(0, 1, J)
    rhs = rng.normal(size=J)
    yhat, s = rng.normal(size=n), rng.normal(size=n)
    xm = rng.normal(size=(n, 2))
    e = monomial_exponents(2, 2)
    center = np.zeros(3)
    return {
        "thomas": ((lower, diag, upper, rhs), _kernels.thomas_numpy),
        "project_interval": ((x, 0.0, 1.0), _kernels.project_interval_numpy),
        "project_ball": ((pts, center, 1.0), _kernels.project_ball_numpy),
        "obstacle_step": ((yhat, s, 0.5, False), _kernels.obstacle_step_numpy),
        "monomials": ((xm, e), _kernels.monomials_numpy),
    }


def bench_kernels(repeat):
    compiled = _kernels.numba_kernels()
    rows = []
    for name, (args, numpy_fn) in cases(np.random.default_rng(0)).items():
        t_np = min(timeit.repeat(lambda: numpy_fn(*args), number=50, repeat=repeat)) / 50
        row = {"kernel": name, "numpy_us": 1e6 * t_np, "numba_us": None, "speedup": None}
        if compiled is not None:
            nb = compiled[name]
            nb(*args)  # compile
            t_nb = min(timeit.repeat(lambda: nb(*args), number=50, repeat=repeat)) / 50
            row.update(numba_us=1e6 * t_nb, speedup=t_np / t_nb)
        rows.append(row)
    return rows


def bench_solves():
    out = []
    for flag in ("1", "0"):
        env = dict(os.environ, RGBDSDE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, mc, fd, value = res.stdout.split()
        out.append({"backend": backend, "mc_solve_s": float(mc), "fd_solve_s": float(fd), "value": float(value)})
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)

    rows = bench_kernels(args.repeat)
    print(f"{'kernel':18s} {'numpy [us]':>12s} {'numba [us]':>12s} {'speedup':>8s}")
    for r in rows:
        nb = "n/a" if r["numba_us"] is None else f"{r['numba_us']:12.1f}"
        sp = "n/a" if r["speedup"] is None else f"{r['speedup']:8.2f}"
        print(f"{r['kernel']:18s} {r['numpy_us']:12.1f} {nb:>12s} {sp:>8s}")

    solves = bench_solves()
    print()
    for s in solves:
        print(f"{s['backend']:6s} reflected MC solve {s['mc_solve_s']:.3f}s  FD oracle {s['fd_solve_s']:.3f}s  mean Y={s['value']:.12f}")
    gap = abs(solves[0]["value"] - solves[1]["value"])
    print(f"backend disagreement on mean Y: {gap:.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": rows, "solves": solves}, fh, indent=2)


if __name__ == "__main__":
    main()
