"""Desk-scale checks of comparison, penalization monotonicity/convergence and
energy boundedness.

Each check owns its noise (generated from the config seed and shared across the
solves it compares) and returns a :class:`PropertyReport`.  Deterministic
configurations are judged exactly; stochastic ones against three jackknife
standard errors.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .coefficients import NO_OBSTACLE
from .errors import ConfigurationError, PreconditionError
from .field import config_hash
from .solver import energy_statistic, solve_penalized
from .timegrid import sample_paths

STAT_FACTOR = 3.0


@dataclass
class PropertyReport:
    name: str
    digest: str
    passed: bool
    worst_margin: float
    details: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def jackknife_se(values):
    """Leave-one-out standard error of the mean of ``values`` (1-D)."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n < 2:
        return 0.0
    loo = (v.sum() - v) / (n - 1)
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def _node_replicates(diff):
    """[replicates, nodes]: outer-path means when there are several outer paths, else inner scenarios."""
    if diff.shape[0] >= 2:
        return diff.mean(axis=1)
    return diff[0]


def _deterministic(*solutions):
    return all(np.all(np.ptp(s.Y.reshape(-1, s.Y.shape[-1]), axis=0) == 0) for s in solutions)


def _paths(coeffs, dom, config):
    d = dom.dim if dom is not None else 1
    return sample_paths(config.grid, d, coeffs.ell, config.M_inner, config.M_outer, config.seed)


def _ordered_pair_margin(lo, hi):
    """Deterministic pairs are judged pointwise; stochastic ones node by node on the
    scenario mean, against three jackknife standard errors at that node."""
    diff = hi.Y - lo.Y
    pointwise = float(np.min(diff))
    if _deterministic(lo, hi):
        return pointwise, {"min_difference": pointwise, "tolerance": 0.0, "deterministic": True}
    reps = _node_replicates(diff)
    means = reps.mean(axis=0)
    se = np.array([jackknife_se(reps[:, i]) for i in range(reps.shape[1])])
    k = int(np.argmin(means + STAT_FACTOR * se))
    margin = float(means[k] + STAT_FACTOR * se[k])
    return margin, {"min_difference": float(means[k]), "tolerance": float(STAT_FACTOR * se[k]), "node": k,
                    "min_pointwise_difference": pointwise, "deterministic": False}


def _sample_points(dom, rng, count):
    return dom.sample(rng, count) if dom is not None else None


def _check_ordering(base, dominating, dom, T, seed, budget=256):
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(11,)))
    d = dom.dim if dom is not None else 1
    x = _sample_points(dom, rng, budget)
    t = rng.uniform(0.0, T, budget)
    y = rng.uniform(-5, 5, budget)
    z = rng.uniform(-5, 5, (budget, d))
    problems = []
    use_l = dom is not None and base.l is not None
    xi_gap = dominating.terminal(x if use_l else None, budget) - base.terminal(x if use_l else None, budget)
    if np.min(xi_gap) < 0:
        problems.append(f"terminal ordering violated by {-np.min(xi_gap):.3g}")
    for ti in np.unique(t)[:16]:
        fg = dominating.f(ti, x, y, z) - base.f(ti, x, y, z)
        if np.min(fg) < 0:
            problems.append(f"f ordering violated by {-np.min(fg):.3g} at t={ti:.3g}")
            break
        pg = dominating.phi(ti, x, y) - base.phi(ti, x, y)
        if np.min(pg) < 0:
            problems.append(f"phi ordering violated by {-np.min(pg):.3g} at t={ti:.3g}")
            break
        gg = dominating.eval_g(ti, x, y, z) - base.eval_g(ti, x, y, z)
        if np.max(np.abs(gg)) > 1e-12:
            problems.append("g differs between the two problems")
            break
    if problems:
        raise PreconditionError("comparison preconditions fail under sampling: " + "; ".join(problems))


def comparison_check(base, dominating, config, dom=None, x0=None, seeds=None):
    """Solve both non-reflected equations on shared noise and report min(Y' - Y)."""
    seeds = [config.seed] if seeds is None else list(seeds)
    _check_ordering(base, dominating, dom, config.T, seeds[0])
    details, margins = [], []
    for seed in seeds:
        cfg = config.with_(seed=int(seed))
        paths = _paths(base, dom, cfg)
        y = solve_penalized(base, NO_OBSTACLE, 0, dom, paths, cfg, x0)
        y2 = solve_penalized(dominating, NO_OBSTACLE, 0, dom, paths, cfg, x0)
        margin, info = _ordered_pair_margin(y, y2)
        info.update(seed=int(seed), margin=margin,
                    value_difference=float(np.mean(y2.Y[..., 0] - y.Y[..., 0])))
        details.append(info)
        margins.append(margin)
    worst = float(min(margins))
    digest = config_hash("comparison", base.name, dominating.name, config.__dict__, seeds)
    return PropertyReport("comparison", digest, worst >= 0, worst, details)


def _penalized_family(coeffs, obstacle, n_values, config, dom, x0):
    paths = _paths(coeffs, dom, config)
    cache = {}
    for n in n_values:
        if n not in cache:
            cache[n] = solve_penalized(coeffs, obstacle, n, dom, paths, config, x0)
    return cache


def penalization_monotone_check(coeffs, obstacle, n_list, config, dom=None, x0=None):
    """Y^n must not decrease with n (shared noise)."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2 or any(b < a for a, b in zip(n_list, n_list[1:])):
        raise ConfigurationError("n_list must be non-decreasing with at least two entries")
    sols = _penalized_family(coeffs, obstacle, n_list, config, dom, x0)
    details, margins = [], []
    for a, b in zip(n_list, n_list[1:]):
        margin, info = _ordered_pair_margin(sols[a], sols[b])
        info.update(n=a, n_next=b, margin=margin,
                    gap_at_horizon=float(np.mean(sols[b].Y[..., 0] - sols[a].Y[..., 0])))
        details.append(info)
        margins.append(margin)
    worst = float(min(margins))
    digest = config_hash("penalization_monotone", coeffs.name, obstacle.name, config.__dict__, n_list)
    return PropertyReport("penalization_monotone", digest, worst >= 0, worst, details)


def _loglog_slope(n, a):
    n, a = np.asarray(n, float), np.asarray(a, float)
    if np.any(a <= 0):
        return float("nan")
    return float(np.polyfit(np.log(n), np.log(a), 1)[0])


def convergence_check(coeffs, obstacle, n_list, config, dom=None, x0=None, slope_max=-0.8):
    """Obstacle violation sup (Y^n - S)^- and Cauchy gaps sup |Y^n - Y^{2n}| must shrink."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ConfigurationError("convergence_check needs at least three penalty weights")
    if obstacle is None or not obstacle.enabled:
        raise PreconditionError("convergence_check needs an enabled obstacle")
    sols = _penalized_family(coeffs, obstacle, sorted(set(n_list) | {2 * n for n in n_list}), config, dom, x0)
    viol, cauchy = [], []
    for n in n_list:
        s = sols[n]
        viol.append(float(np.max(np.maximum(s.S[None] - s.Y, 0.0))))
        cauchy.append(float(np.max(np.abs(sols[2 * n].Y - s.Y))))
    decreasing = all(b <= a for a, b in zip(viol, viol[1:])) and all(b <= a for a, b in zip(cauchy, cauchy[1:]))
    slope = _loglog_slope(n_list, viol)
    rate_ok = np.isnan(slope) and max(viol) == 0.0 or (not np.isnan(slope) and slope <= slope_max)
    passed = bool(decreasing and rate_ok)
    margin = (slope_max - slope) if not np.isnan(slope) else 0.0
    details = [{"n": n, "violation": v, "cauchy_gap": c} for n, v, c in zip(n_list, viol, cauchy)]
    digest = config_hash("convergence", coeffs.name, obstacle.name, config.__dict__, n_list)
    return PropertyReport("convergence", digest, passed, float(margin), details,
                          {"slope": slope, "decreasing": decreasing})


def energy_bound_check(coeffs, obstacle, n_list, mu, config, dom=None, x0=None, rel_tol=0.10):
    """Energies of the penalized family must plateau: last two within ``rel_tol``."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ConfigurationError("energy_bound_check needs at least three penalty weights")
    sols = _penalized_family(coeffs, obstacle, n_list, config, dom, x0)
    details, totals = [], []
    for n in n_list:
        e = energy_statistic(sols[n], sols[n].bundle, mu)
        totals.append(e.total)
        details.append({"n": n, **e.__dict__, "total": e.total})
    last, prev = totals[-1], totals[-2]
    scale = max(abs(last), abs(prev))
    rel = abs(last - prev) / scale if scale > 0 else 0.0
    digest = config_hash("energy_bound", coeffs.name, obstacle.name, config.__dict__, n_list, mu)
    return PropertyReport("energy_bound", digest, rel <= rel_tol, float(rel_tol - rel), details,
                          {"relative_change": rel})
