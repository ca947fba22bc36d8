"""Acceptance criteria 1-10.

Each check returns ``(passed, detail)``; runtimes are part of the verdict.
Under pytest every criterion is one test and a PASS/FAIL line per criterion
is printed in the terminal summary.  ``python3 tests/test_acceptance.py``
prints the same lines without pytest.
"""
import json
import math
import os
import sys
import tempfile
import time

import numpy as np
import pytest

from rgbdsde.cli import run_experiment
from rgbdsde.coefficients import NO_OBSTACLE, build_coefficients, ramp_obstacle
from rgbdsde.config import spec_from_dict
from rgbdsde.diffusion import DiffusionSpec, local_time_moments, simulate_reflected
from rgbdsde.domain import Interval
from rgbdsde.field import evaluate_field
from rgbdsde.pde_oracle import FdMesh, compare_mc_fd, solve_obstacle_pde_1d
from rgbdsde.properties import comparison_check, penalization_monotone_check
from rgbdsde.solver import SolverConfig, picard_solve, solve_penalized, solve_reflected
from rgbdsde.timegrid import make_grid, sample_paths

RESULTS = {}
UNIT = Interval(0.0, 1.0)
RAMP = ramp_obstacle(1.0, 0.0)
RAMP_CFG = SolverConfig(N=512, M_inner=1, degree=0)
# active obstacle for the heat-type field: h(t, x) = 1 + 0.3 t, h(0, x) = 1 <= l(x)
ACTIVE = ramp_obstacle(0.3, 1.0)


def ramp_closed_form(t, n):
    return t - (1.0 - math.exp(-n * t)) / n


def ramp_residual(n):
    """-(1/n) int_0^1 (1 - e^{-nt})^2 dt in closed form."""
    return -(1.0 - 2.0 * (1.0 - math.exp(-n)) / n + (1.0 - math.exp(-2.0 * n)) / (2.0 * n)) / n


def timed(limit):
    def wrap(fn):
        def run():
            start = time.perf_counter()
            ok, detail = fn()
            elapsed = time.perf_counter() - start
            in_time = elapsed < limit
            detail = f"{detail}; {elapsed:.2f}s (limit {limit:g}s)"
            return ok and in_time, detail
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


@timed(1.0)
def criterion_1():
    """Penalized closed form"""
    sol = solve_penalized(build_coefficients("ramp"), RAMP, 10, config=RAMP_CFG)
    y = float(sol.Y[0, 0, 0])
    expected = ramp_closed_form(1.0, 10)
    err = abs(y - expected)
    return err <= 1e-3, f"Y(1)={y:.7f} vs {expected:.7f}, |err|={err:.2e} <= 1e-3"


@timed(1.0)
def criterion_2():
    """Reflected exactness"""
    sol = solve_reflected(build_coefficients("ramp"), RAMP, config=RAMP_CFG)
    path_err = float(np.max(np.abs(sol.Y[0, 0] - sol.original_times())))
    k_err = abs(float(sol.K_total[0, 0]) - 1.0)
    comp = float(np.sum((sol.Y[0, 0, :-1] - sol.S[0, :-1]) * sol.dK[0, 0]))
    gap = float(np.min(sol.Y - sol.S[None]))
    ok = path_err <= 1e-12 and k_err <= 1e-12 and comp == 0.0 and gap >= 0.0
    return ok, f"max|Y-t|={path_err:.1e}, |K_total-1|={k_err:.1e}, sum (Y-S)dK={comp}, min(Y-S)={gap}"


def _shift_terminal(coeffs, delta):
    l = coeffs.l
    return coeffs.replace(l=lambda x: l(x) + delta, xi=coeffs.xi + delta, name=f"{coeffs.name}+{delta}")


@timed(120.0)
def criterion_3():
    """Comparison theorem"""
    base = build_coefficients("saturating", {"g_amp": 0.2})
    cfg = SolverConfig(N=16, M_inner=512, M_outer=8, degree=2)
    violations, worst, runs = 0, math.inf, 0
    for delta in (0.1, 1.0):
        up = _shift_terminal(base, delta)
        for seed in range(10):
            r = comparison_check(base, up, cfg.with_(seed=seed), UNIT, [0.5], seeds=[seed])
            runs += 1
            violations += not r.passed
            worst = min(worst, r.worst_margin)
    # deterministic sub-suite: exact ordering
    det_ok = True
    for params in ({"f_0": 0.5}, {"f_y": -1.0}, {"f_y": -1.0, "phi_y": -1.0}):
        for delta in (0.1, 1.0):
            base_d = build_coefficients("affine", params)
            r = comparison_check(base_d, _shift_terminal(base_d, delta), RAMP_CFG)
            det_ok &= r.passed and r.details[0]["deterministic"] and r.details[0]["min_difference"] >= 0
    ok = violations == 0 and det_ok and runs == 20
    return ok, f"{runs} stochastic configs, {violations} violations (worst margin {worst:.3g}); deterministic exact={det_ok}"


@timed(120.0)
def criterion_4():
    """Monotone penalization"""
    n_list = [1, 10, 100]
    det = penalization_monotone_check(build_coefficients("ramp"), RAMP, n_list, RAMP_CFG)
    det_ok = det.passed and det.worst_margin >= 0 and all(d["deterministic"] for d in det.details)
    stoch = []
    for seed in range(5):
        cfg = SolverConfig(N=32, M_inner=2048, degree=2, seed=seed)
        stoch.append(penalization_monotone_check(build_coefficients("neumann_heat"), ACTIVE, n_list, cfg, UNIT, [0.5]))
    sat = build_coefficients("saturating", {"g_amp": 0.2})
    for seed in range(5):
        cfg = SolverConfig(N=32, M_inner=1024, M_outer=8, degree=2, seed=seed)
        stoch.append(penalization_monotone_check(sat, ACTIVE, n_list, cfg, UNIT, [0.5]))
    failed = sum(not r.passed for r in stoch)
    worst = min(r.worst_margin for r in stoch)
    return det_ok and failed == 0, (f"deterministic exact={det_ok}; stochastic {len(stoch) - failed}/{len(stoch)} "
                                    f"within 3 sigma (worst margin {worst:.3g})")


ORACLE_CONFIG = {
    "seed": 1,
    "coefficients": {"family": "neumann_heat"},
    "obstacle": {"kind": "ramp", "params": {"slope": 1.0, "offset": -0.5}},
    "domain": {"kind": "interval", "lo": 0.0, "hi": 1.0},
    "start": [0.5],
    "solver": {"T": 1.0, "N": 64, "M_inner": 4096, "M_outer": 1, "degree": 2},
    "probes": [[0.25, 0.5], [0.5, 0.25], [0.5, 0.75], [1.0, 0.5]],
    "fd_mesh": {"N_fd": 200, "J": 256},
}


@timed(300.0)
def criterion_5():
    """Probabilistic representation vs PDE oracle"""
    c = build_coefficients("neumann_heat")
    ob = ramp_obstacle(1.0, -0.5)
    fd = solve_obstacle_pde_1d(c, ob, FdMesh(0.0, 1.0, 256, 200, 1.0))
    probes = [(t, np.array([x])) for t, x in ORACLE_CONFIG["probes"]]
    table = evaluate_field(c, ob, UNIT, probes, SolverConfig(N=64, M_inner=4096, M_outer=1, degree=2, seed=1))
    rep = compare_mc_fd(table, fd)
    return rep.max_rel <= 0.05, f"max relative error {rep.max_rel:.4f} of FD range {rep.fd_range:.4f} (<= 0.05)"


@timed(1.0)
def criterion_6():
    """Skorokhod residual decay"""
    c = build_coefficients("ramp")
    ns = [10, 20, 40, 80, 160]
    res = [solve_penalized(c, RAMP, n, config=RAMP_CFG).diagnostics["skorokhod_residual"] for n in ns]
    err10 = abs(res[0] - ramp_residual(10))
    ratios = [b / a for a, b in zip(res, res[1:])]
    ok = abs(res[0] - (-0.0850)) <= 1e-3 and err10 <= 1e-3 and all(0.35 <= r <= 0.65 for r in ratios)
    return ok, f"residual(10)={res[0]:.5f} (closed form {ramp_residual(10):.5f}); doubling ratios {np.round(ratios, 3).tolist()}"


@timed(300.0)
def criterion_7():
    """Energy boundedness"""
    from rgbdsde.properties import energy_bound_check
    n_list = [1, 10, 100, 1000]
    cases = [
        ("heat", build_coefficients("neumann_heat"), SolverConfig(N=64, M_inner=4096, degree=2, seed=1)),
        ("saturating-g", build_coefficients("saturating", {"g_amp": 0.2}),
         SolverConfig(N=64, M_inner=4096, M_outer=4, degree=2, seed=1)),
    ]
    parts, ok = [], True
    for name, c, cfg in cases:
        r = energy_bound_check(c, ACTIVE, n_list, 1.0, cfg, UNIT, [0.5])
        ok &= r.passed
        parts.append(f"{name}: last-two relative change {r.summary['relative_change']:.4f}")
    return ok, "; ".join(parts) + " (<= 0.10)"


@timed(60.0)
def criterion_8():
    """Contraction"""
    c = build_coefficients("linear", {"g_y": 0.3, "f_y": -0.5, "xi": 1.0})
    cfg = SolverConfig(N=64, M_inner=1, M_outer=16, degree=0, seed=3, picard_tol=1e-12)
    _, hist = picard_solve(c, NO_OBSTACLE, config=cfg)
    ratios = [b / a for a, b in zip(hist, hist[1:])]
    decreasing = all(b < a for a, b in zip(hist, hist[1:]))
    c0 = build_coefficients("affine", {"g_0": 0.3, "f_y": -0.5, "xi": 1.0})
    _, hist0 = picard_solve(c0, NO_OBSTACLE, config=cfg)
    one_step = len(hist0) >= 2 and hist0[1] <= 1e-12
    ok = decreasing and max(ratios) < 0.9 and one_step
    return ok, (f"{len(hist)} iterations, strictly decreasing={decreasing}, max ratio {max(ratios):.3g} (< 0.9); "
                f"constant g second delta {hist0[1]:.1e}")


@timed(30.0)
def criterion_9():
    """Local time"""
    grid = make_grid(1.0, 64)
    pinned = DiffusionSpec(lambda x: np.full_like(x, -1.0), lambda x: np.zeros((x.shape[0], 1, 1)), 0.25)
    b = simulate_reflected(pinned, UNIT, grid, sample_paths(grid, 1, 1, 4, 1, 0))
    a_err = float(np.max(np.abs(b.A_total - 0.75)))
    rbm = DiffusionSpec(lambda x: np.zeros_like(x), lambda x: np.ones((x.shape[0], 1, 1)), 0.5)
    b2 = simulate_reflected(rbm, UNIT, grid, sample_paths(grid, 1, 1, 4096, 1, 0))
    stats = local_time_moments(b2, 1.0)
    ok = a_err <= grid.dt and np.isfinite(stats.exp_moment) and not stats.overflow
    return ok, f"|A_total-0.75|={a_err:.2e} <= dt={grid.dt:.4f}; E[e^A]={stats.exp_moment:.4f}, overflow={stats.overflow}"


RAMP_CONFIG = {
    "seed": 0,
    "coefficients": {"family": "ramp"},
    "obstacle": {"kind": "ramp"},
    "solver": {"N": 512, "M_inner": 1, "degree": 0, "penalty_n": 10},
    "properties": ["ramp_closed_form", "penalization_monotone"],
}


def _tree(out):
    files = {}
    for root, _, names in os.walk(out):
        for name in names:
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out)
            if name == "manifest.json":
                doc = json.load(open(path))
                doc.pop("timings")
                files[rel] = json.dumps(doc, sort_keys=True).encode()
            else:
                files[rel] = open(path, "rb").read()
    return files


@timed(600.0)
def criterion_10():
    """Reproducibility"""
    runs = [("solve", RAMP_CONFIG), ("properties", RAMP_CONFIG), ("oracle", ORACLE_CONFIG), ("field", ORACLE_CONFIG)]
    with tempfile.TemporaryDirectory() as tmp:
        trees = []
        for rep in ("first", "second"):
            for command, cfg in runs:
                run_experiment(spec_from_dict(cfg), command, os.path.join(tmp, rep, command))
            trees.append(_tree(os.path.join(tmp, rep)))
    same = trees[0] == trees[1]
    n_csv = sum(name.endswith(".csv") for name in trees[0])
    return same and n_csv > 0, f"{len(trees[0])} files ({n_csv} CSV) byte-identical={same} across reruns"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _line(k, fn, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d} {fn.__doc__}: {detail}"


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k):
    fn = CRITERIA[k - 1]
    ok, detail = fn()
    RESULTS[k] = _line(k, fn, ok, detail)
    print(RESULTS[k])
    assert ok, RESULTS[k]


if __name__ == "__main__":
    failures = 0
    for k, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        failures += not ok
        print(_line(k, fn, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
