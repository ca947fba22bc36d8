"""The random field u(t, x) = Y_t^{t,x} on a set of probes.

Time orientation adapter: a probe's ``t`` is the remaining time of the
original problem.  The backward-running forward diffusion started from
``x`` at time ``t`` becomes an ordinary forward simulation of length ``t``,
and the noise it sees is the original-time noise read backwards
(:meth:`NoisePaths.internal_view`).  All probes share one noise sample, so
differences between probes are common-noise differences.
"""
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import NO_OBSTACLE, validate_assumptions
from .diffusion import steps_for
from .errors import AssumptionError, ConfigurationError
from .solver import SolverConfig, _sweep, prepare
from .timegrid import make_grid, sample_paths


@dataclass
class FieldTable:
    probes: list  # [(t, x-array)]
    values: np.ndarray  # [M_outer, P]
    meta: dict = field(default_factory=dict)

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def sd(self):
        if self.values.shape[0] < 2:
            return np.zeros(self.values.shape[1])
        return self.values.std(axis=0, ddof=1)

    def rows(self):
        for j, (t, x) in enumerate(self.probes):
            for o in range(self.values.shape[0]):
                yield t, x, o, self.values[o, j]

    def aggregate_rows(self):
        mean, sd = self.mean, self.sd
        for j, (t, x) in enumerate(self.probes):
            yield t, x, mean[j], sd[j]


def config_hash(*parts):
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _normalise_probes(probes, dom):
    out = []
    for t, x in probes:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not dom.in_closure(x):
            raise ConfigurationError(f"probe x={x.tolist()} lies outside the domain closure")
        if t < 0:
            raise ConfigurationError(f"probe time {t} is negative")
        out.append((float(t), x))
    return out


def _probe_value(coeffs, obstacle, dom, noise, config, t, x):
    grid = config.grid
    k = steps_for(t, grid)
    Mo = noise.b_increments.shape[0]
    if k == 0:
        return np.full(Mo, float(np.asarray(coeffs.l(x[None, :]), dtype=float).reshape(-1)[0]))
    sub = config.with_(T=k * grid.dt, N=k)
    prob = prepare(coeffs, dom, noise.internal_view(k), sub, x0=x, view=False)
    Y, _, _, _ = _sweep(coeffs, obstacle, prob, config.degree, True, 0.0)
    # node 0 is deterministic in x, so every inner scenario holds the same value
    return Y[:, :, 0].mean(axis=1)


def evaluate_field(coeffs, obstacle, dom, probes, config, threads=1, paths=None):
    """u at each probe, one value per outer B-path.

    ``config.T`` must cover the largest probe time and every probe time must
    be a multiple of ``config.T / config.N``.
    """
    obstacle = obstacle or NO_OBSTACLE
    probes = _normalise_probes(probes, dom)
    if probes and max(t for t, _ in probes) > config.T + 1e-12:
        raise ConfigurationError("a probe time exceeds the solver horizon T")
    if config.check_assumptions:
        report = validate_assumptions(coeffs, obstacle, 256, config.seed, domain=dom, T=config.T)
        if not report.ok:
            raise AssumptionError("assumption check failed: " + "; ".join(map(str, report.errors)), report)
    grid = make_grid(config.T, config.N)
    noise = paths or sample_paths(grid, dom.dim, coeffs.ell, config.M_inner, config.M_outer, config.seed)

    def work(probe):
        return _probe_value(coeffs, obstacle, dom, noise, config, *probe)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            columns = list(pool.map(work, probes))
    else:
        columns = [work(p) for p in probes]
    values = np.stack(columns, axis=1) if columns else np.zeros((config.M_outer, 0))
    meta = {"seed": config.seed, "config_hash": config_hash(coeffs.name, obstacle.name, dom.to_dict(), config.__dict__)}
    return FieldTable(probes, values, meta)


@dataclass
class FieldContinuityReport:
    pairs: list
    differences: np.ndarray  # [M_outer, n_pairs]
    distance: np.ndarray  # |t1 - t2| + |x1 - x2|
    modulus: np.ndarray  # mean |difference| / distance (0 for identical probes)


def field_continuity_report(coeffs, dom, pairs, config, obstacle=None, threads=1):
    """Common-noise differences |u(t1, x1) - u(t2, x2)| per outer path."""
    if not pairs:
        raise ConfigurationError("field_continuity_report needs at least one pair")
    flat = [p for pair in pairs for p in pair]
    table = evaluate_field(coeffs, obstacle, dom, flat, config, threads=threads)
    v = table.values
    diffs = np.abs(v[:, 0::2] - v[:, 1::2])
    dist = np.array([abs(a[0] - b[0]) + float(np.linalg.norm(np.subtract(a[1], b[1]))) for a, b in pairs])
    mean_diff = diffs.mean(axis=0)
    modulus = np.where(dist > 0, mean_diff / np.where(dist > 0, dist, 1.0), 0.0)
    return FieldContinuityReport(list(pairs), diffs, dist, modulus)


__all__ = ["FieldTable", "evaluate_field", "field_continuity_report", "FieldContinuityReport", "SolverConfig"]
