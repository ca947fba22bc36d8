"""Command line: ``rgbdsde {solve,field,oracle,properties,summarize}``.

Every run writes its tables (CSV) and reports (JSON) plus ``manifest.json``
into the output directory.  Outputs are a pure function of the configuration
and seed; only the manifest's ``timings`` block varies between reruns.
"""
import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _kernels
from .config import load_config
from .errors import RgbdsdeError
from .field import evaluate_field
from .pde_oracle import FdMesh, compare_mc_fd, solve_obstacle_pde_1d
from .properties import (
    PropertyReport, comparison_check, convergence_check, energy_bound_check, penalization_monotone_check,
)
from .solver import picard_solve, solve_penalized, solve_reflected

log = logging.getLogger("rgbdsde")

SCHEMA = 1
COMMANDS = ("solve", "field", "oracle", "properties")


@dataclass
class RunManifest:
    command: str
    digest: str
    seed: int
    spec: dict
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: bool = True
    status: int = 0
    error: str = None
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "command": self.command,
            "digest": self.digest,
            "seed": self.seed,
            "versions": {"rgbdsde": __version__, "numpy": np.__version__,
                         "python": platform.python_version(), "kernels": _kernels.BACKEND},
            "spec": self.spec,
            "outputs": self.outputs,
            "summary": self.summary,
            "passed": self.passed,
            "status": self.status,
            "error": self.error,
            "timings": self.timings,
        }


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# commands


def _solution_rows(sol):
    Y, Z, K = sol.Y, sol.Z, sol.K
    dA = sol.dA()
    Mo, Mi, n1 = Y.shape
    d = Z.shape[-1]
    for o in range(Mo):
        for m in range(Mi):
            for i in range(n1):
                last = i == n1 - 1
                zs = [None] * d if last else list(Z[o, m, i])
                yield [o, m, i, Y[o, m, i], *zs, K[o, m, i], None if last else dA[m, i]]


def _run_solve(spec, out, threads):
    coeffs, obstacle, dom = spec.build_coefficients(), spec.build_obstacle(), spec.build_domain()
    cfg = spec.solver_config()
    x0 = spec.start
    n = cfg.penalty_n
    if n is not None:
        sol = solve_penalized(coeffs, obstacle, n, dom, None, cfg, x0)
    else:
        sol = solve_reflected(coeffs, obstacle, dom, None, cfg, x0)
    d = sol.Z.shape[-1]
    header = ["outer", "inner", "step", "Y"] + [f"Z{k + 1}" for k in range(d)] + ["K", "dA"]
    write_csv(os.path.join(out, "solution.csv"), header, _solution_rows(sol))
    files = ["solution.csv"]
    if sol.bundle is not None:
        X, dA = sol.bundle.X, sol.bundle.dA
        rows = ([m, i, *X[m, i], dA[m, i] if i < dA.shape[1] else None]
                for m in range(X.shape[0]) for i in range(X.shape[1]))
        write_csv(os.path.join(out, "paths.csv"),
                  ["scenario", "step"] + [f"X{k + 1}" for k in range(X.shape[2])] + ["dA"], rows)
        files.append("paths.csv")
    diag = dict(sol.diagnostics)
    diag["value"] = float(np.mean(sol.Y[..., 0]))
    diag["K_total"] = float(np.mean(sol.K_total))
    diag["penalty_n"] = n
    write_json(os.path.join(out, "diagnostics.json"), diag)
    files.append("diagnostics.json")
    summary = {"value": diag["value"], "K_total": diag["K_total"], "penalty_n": n,
               "skorokhod_residual": diag.get("skorokhod_residual"), "min_gap": diag.get("min_gap")}
    return files, summary, True


def _probes(spec):
    return [(p[0], p[1:]) for p in spec.probes]


def _run_field(spec, out, threads):
    coeffs, obstacle, dom = spec.build_coefficients(), spec.build_obstacle(), spec.build_domain()
    if dom is None:
        raise RgbdsdeError("the field command needs a domain")
    table = evaluate_field(coeffs, obstacle, dom, _probes(spec), spec.solver_config(), threads=threads)
    _write_field(table, out)
    summary = {"probes": len(table.probes), "mean": table.mean.tolist(), "config_hash": table.meta["config_hash"]}
    return ["field.csv", "field_aggregate.csv"], summary, table


def _xval(x):
    x = np.atleast_1d(x)
    return float(x[0]) if x.size == 1 else " ".join(repr(float(v)) for v in x)


def _write_field(table, out):
    write_csv(os.path.join(out, "field.csv"), ["t", "x", "outer_path", "value"],
              ([t, _xval(x), o, v] for t, x, o, v in table.rows()))
    write_csv(os.path.join(out, "field_aggregate.csv"), ["t", "x", "mean", "sd"],
              ([t, _xval(x), m, s] for t, x, m, s in table.aggregate_rows()))


def _run_oracle(spec, out, threads):
    coeffs, obstacle, dom = spec.build_coefficients(), spec.build_obstacle(), spec.build_domain()
    if dom is None or dom.kind != "interval":
        raise RgbdsdeError("the oracle command needs a 1D interval domain")
    T = spec.solver["T"]
    mesh = FdMesh(dom.lo, dom.hi, int(spec.fd_mesh["J"]), int(spec.fd_mesh["N_fd"]), T)
    fd = solve_obstacle_pde_1d(coeffs, obstacle, mesh)
    write_csv(os.path.join(out, "fd.csv"), ["t", "x", "u"], fd.to_rows())
    files = ["fd.csv"]
    summary = {"fd_range": float(np.ptp(fd.u)), "max_penalty_iterations": int(fd.penalty_iterations.max())}
    passed = True
    if spec.probes:
        table = evaluate_field(coeffs, obstacle, dom, _probes(spec), spec.solver_config(), threads=threads)
        _write_field(table, out)
        report = compare_mc_fd(table, fd)
        write_json(os.path.join(out, "comparison.json"),
                   {"rows": report.table(), "max_abs_error": report.max_abs,
                    "max_relative_error": report.max_rel, "fd_range": report.fd_range})
        files += ["field.csv", "field_aggregate.csv", "comparison.json"]
        summary["max_relative_error"] = report.max_rel
        summary["max_abs_error"] = report.max_abs
        passed = report.max_rel <= 0.05
    return files, summary, passed


def _shifted(coeffs, delta):
    l = coeffs.l
    shifted_l = None if l is None else (lambda x: l(x) + delta)
    xi = coeffs.xi
    shifted_xi = (lambda x: xi(x) + delta) if callable(xi) else xi + delta
    return coeffs.replace(l=shifted_l, xi=shifted_xi, name=f"{coeffs.name}+{delta}")


def _picard_report(coeffs, obstacle, dom, cfg, x0, max_ratio):
    _, history = picard_solve(coeffs, obstacle, dom, None, cfg, x0)
    positive = [h for h in history if h > 0]
    ratios = [b / a for a, b in zip(positive, positive[1:])]
    decreasing = all(b < a for a, b in zip(history, history[1:]) if a > 0)
    worst = max(ratios) if ratios else 0.0
    passed = decreasing and worst < max_ratio
    return PropertyReport("picard", "", passed, float(max_ratio - worst),
                          [{"iteration": k + 1, "delta": h} for k, h in enumerate(history)],
                          {"max_ratio": worst, "iterations": len(history)})


def _ramp_report(coeffs, obstacle, cfg, n):
    T = cfg.T
    pen = solve_penalized(coeffs, obstacle, n, None, None, cfg)
    ref = solve_reflected(coeffs, obstacle, None, None, cfg)
    expected = T - (1 - math.exp(-n * T)) / n
    y_err = abs(float(pen.Y[0, 0, 0]) - expected)
    refl_err = float(np.max(np.abs(ref.Y[0, 0] - ref.original_times())))
    k_err = abs(float(ref.K_total[0, 0]) - T)
    resid = pen.diagnostics["skorokhod_residual"]
    quad = (T - 2 * (1 - math.exp(-n * T)) / n + (1 - math.exp(-2 * n * T)) / (2 * n)) / n
    checks = {"penalized_value_error": (y_err, 1e-3), "reflected_path_error": (refl_err, 1e-12),
              "reflected_K_error": (k_err, 1e-12), "residual_error": (abs(resid + quad), 1e-3)}
    margin = min(tol - err for err, tol in checks.values())
    details = [{"check": k, "error": e, "tolerance": t} for k, (e, t) in checks.items()]
    return PropertyReport("ramp_closed_form", "", margin >= 0, float(margin), details,
                          {"penalized_value": float(pen.Y[0, 0, 0]), "expected": expected})


def _run_properties(spec, out, threads):
    coeffs, obstacle, dom = spec.build_coefficients(), spec.build_obstacle(), spec.build_domain()
    cfg = spec.solver_config()
    x0 = spec.start
    reports = []
    for entry in spec.properties:
        name = entry["name"]
        if name == "comparison":
            seeds = entry["seeds"] if entry["seeds"] is not None else [spec.seed]
            r = comparison_check(coeffs, _shifted(coeffs, entry["delta"]), cfg, dom, x0, seeds)
        elif name == "penalization_monotone":
            r = penalization_monotone_check(coeffs, obstacle, entry["n_list"], cfg, dom, x0)
        elif name == "convergence":
            r = convergence_check(coeffs, obstacle, entry["n_list"], cfg, dom, x0)
        elif name == "energy_bound":
            r = energy_bound_check(coeffs, obstacle, entry["n_list"], entry["mu"], cfg, dom, x0)
        elif name == "picard":
            r = _picard_report(coeffs, obstacle, dom, cfg, x0, entry["max_ratio"])
        else:
            r = _ramp_report(coeffs, obstacle, cfg, entry["n"])
        if not r.digest:
            r.digest = spec.digest[:16]
        reports.append(r)
    write_json(os.path.join(out, "properties.json"), [r.to_dict() for r in reports])
    summary = {r.name: {"passed": r.passed, "worst_margin": r.worst_margin, **r.summary} for r in reports}
    return ["properties.json"], summary, all(r.passed for r in reports)


RUNNERS = {"solve": _run_solve, "field": _run_field, "oracle": _run_oracle, "properties": _run_properties}


def run_experiment(spec, command="solve", out=None, threads=1):
    """Execute one command for ``spec``; errors are captured in the manifest."""
    if command not in RUNNERS:
        raise ValueError(f"unknown command {command!r}")
    out = out or spec.output
    os.makedirs(out, exist_ok=True)
    manifest = RunManifest(command, spec.digest, spec.seed, spec.to_dict())
    start = time.perf_counter()
    try:
        files, summary, passed = RUNNERS[command](spec, out, threads)
        if command == "field":
            passed = True
        manifest.outputs, manifest.summary, manifest.passed = files, summary, bool(passed)
        manifest.status = 0 if passed else 1
    except (RgbdsdeError, ValueError, ArithmeticError) as exc:
        log.error("%s failed: %s", command, exc)
        manifest.passed, manifest.status, manifest.error = False, 2, f"{type(exc).__name__}: {exc}"
    manifest.timings = {"total_seconds": time.perf_counter() - start}
    write_json(os.path.join(out, "manifest.json"), manifest.to_dict())
    return manifest


def _metrics(doc):
    s = doc.get("summary") or {}
    out = {}
    for k, v in s.items():
        if isinstance(v, (int, float)) and not isinstance(v, bool) or v is None:
            out[k] = v
        elif isinstance(v, dict) and "passed" in v:
            out[k] = v["passed"]
    return out


def summarize(manifests):
    """One row per manifest plus an aggregate verdict; n-sweeps are ordered by n."""
    if not manifests:
        raise ValueError("summarize needs at least one manifest")
    docs = [m.to_dict() if isinstance(m, RunManifest) else m for m in manifests]
    rows = [{"digest": d["digest"][:16], "seed": d["seed"], "command": d["command"],
             **_metrics(d), "passed": bool(d["passed"])} for d in docs]
    if all(r.get("penalty_n") is not None for r in rows):
        rows.sort(key=lambda r: r["penalty_n"])
    return {"rows": rows, "passed": all(r["passed"] for r in rows)}


def _print_table(rows):
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    print("\t".join(keys))
    for r in rows:
        print("\t".join(_fmt(r.get(k)) for k in keys))


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rgbdsde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="override the config seed and RGBDSDE_SEED")
        p.add_argument("--out", default=None, help="output directory (default: config 'output')")
        p.add_argument("--threads", type=int, default=1)
    p = sub.add_parser("summarize")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--out", default=None, help="also write summary.json here")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "summarize":
        docs = []
        for path in args.manifests:
            if os.path.isdir(path):
                path = os.path.join(path, "manifest.json")
            with open(path, encoding="utf-8") as fh:
                docs.append(json.load(fh))
        result = summarize(docs)
        _print_table(result["rows"])
        print("aggregate:", "PASS" if result["passed"] else "FAIL")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            write_json(os.path.join(args.out, "summary.json"), result)
        return 0 if result["passed"] else 1

    try:
        spec = load_config(args.config, seed=args.seed)
    except RgbdsdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = run_experiment(spec, args.command, args.out, max(1, args.threads))
    print(json.dumps(_jsonable({"command": manifest.command, "passed": manifest.passed,
                                "summary": manifest.summary, "error": manifest.error}), sort_keys=True))
    return manifest.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
