"""Reflected diffusion in the closure of a domain, with boundary local time.

Euler step followed by Euclidean projection: the projection displacement is
the local-time increment, since for convex built-in domains the push is along
the unit inward normal.  Paths run in standard forward orientation: index 0 is
the start point, index ``N`` the state at the end of the horizon.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .timegrid import make_grid, sample_paths


@dataclass
class DiffusionSpec:
    """Drift and diffusion callables plus the start point.

    ``drift(x)`` maps [M, d] -> [M, d]; ``diffusion(x)`` maps [M, d] -> [M, d, d].
    """

    drift: object
    diffusion: object
    start: np.ndarray
    lipschitz_K: float = 1.0

    def __post_init__(self):
        self.start = np.atleast_1d(np.asarray(self.start, dtype=float))
        if not self.lipschitz_K > 0:
            raise ConfigurationError("declared Lipschitz constant must be positive")


@dataclass
class ReflectedPathBundle:
    X: np.ndarray  # [M, N+1, d]
    dA: np.ndarray  # [M, N]

    @property
    def A_total(self):
        return self.dA.sum(axis=1)

    def A_cumulative(self):
        """Running local time from the start, [M, N+1]."""
        out = np.zeros((self.dA.shape[0], self.dA.shape[1] + 1))
        np.cumsum(self.dA, axis=1, out=out[:, 1:])
        return out

    def A_backward(self):
        """Local time accrued between each node and the end of the path, [M, N+1].

        This is the clock the backward equation sees: it vanishes at the
        terminal-condition node and grows toward the start.
        """
        out = np.zeros((self.dA.shape[0], self.dA.shape[1] + 1))
        out[:, :-1] = np.cumsum(self.dA[:, ::-1], axis=1)[:, ::-1]
        return out


def simulate_reflected(spec, dom, grid, paths):
    """Projected Euler scheme driven by ``paths.w_increments`` in the given order."""
    x0 = spec.start
    if x0.shape != (dom.dim,):
        raise ConfigurationError(f"start point has shape {x0.shape}, domain dimension is {dom.dim}")
    if not dom.in_closure(x0):
        raise ConfigurationError(f"start point {x0} lies outside the domain closure")
    dW = paths.w_increments
    M, n_avail, d = dW.shape
    if d != dom.dim:
        raise ConfigurationError(f"W has dimension {d}, domain has {dom.dim}")
    N = grid.N
    if n_avail < N:
        raise ConfigurationError(f"noise has {n_avail} steps, grid needs {N}")
    dt = grid.dt
    X = np.empty((M, N + 1, d))
    dA = np.empty((M, N))
    X[:, 0] = x0
    for i in range(N):
        xi = X[:, i]
        b = np.asarray(spec.drift(xi), dtype=float).reshape(M, d)
        s = np.asarray(spec.diffusion(xi), dtype=float).reshape(M, d, d)
        tentative = xi + b * dt + np.einsum("mij,mj->mi", s, dW[:, i])
        if not np.all(np.isfinite(tentative)):
            raise NumericError("non-finite coefficient evaluation in reflected Euler step", step=i)
        X[:, i + 1], dA[:, i] = dom.project_many(tentative)
    return ReflectedPathBundle(X, dA)


@dataclass
class LocalTimeStats:
    moments: dict  # p -> E[A_total^p]
    exp_moment: float  # E[exp(mu A_total)]
    mu: float
    overflow: bool


def local_time_moments(bundle, mu, p_list=(1, 2, 3)):
    a = bundle.A_total
    if a.size == 0:
        raise ConfigurationError("empty path bundle")
    moments = {int(p): float(np.mean(a ** p)) for p in p_list}
    with np.errstate(over="ignore"):
        e = float(np.mean(np.exp(mu * a)))
    return LocalTimeStats(moments, e, float(mu), not np.isfinite(e))


@dataclass
class ContinuityReport:
    pairs: list
    x_moment: np.ndarray  # E[sup |X1 - X2|^4] per pair
    a_moment: np.ndarray  # E[sup |A1 - A2|^4] per pair
    scale: np.ndarray  # |t2 - t1|^2 + |x1 - x2|^4
    x_ratio: np.ndarray
    a_ratio: np.ndarray


def _ratio(num, den):
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def continuity_probe(spec, dom, grid, pairs, M, seed):
    """Fourth-moment differences of two reflected paths under common noise.

    ``pairs`` holds ``((t1, x1), (t2, x2))`` with remaining-time parameters on
    the grid.  Both paths see the same W increment at each original time, and are
    compared on the common original-time window ``[0, min(t1, t2)]``.
    """
    if not pairs:
        raise ConfigurationError("continuity_probe needs at least one pair")
    noise = sample_paths(grid, dom.dim, 1, M, 1, seed)
    x_mom, a_mom, scale = [], [], []
    for (t1, x1), (t2, x2) in pairs:
        k1, k2 = steps_for(t1, grid), steps_for(t2, grid)
        runs = []
        for k, x in ((k1, x1), (k2, x2)):
            sub = DiffusionSpec(spec.drift, spec.diffusion, x, spec.lipschitz_K)
            runs.append(simulate_reflected(sub, dom, make_grid(max(k, 1) * grid.dt, max(k, 1)),
                                           noise.internal_view(max(k, 1))) if k else None)
        k_common = min(k1, k2)
        x1a, x2a = np.atleast_1d(np.asarray(x1, float)), np.atleast_1d(np.asarray(x2, float))
        if k_common == 0:
            dx = np.full(M, np.linalg.norm(x1a - x2a))
            da = np.zeros(M)
        else:
            # original-time node j corresponds to internal index k - j
            j = np.arange(k_common + 1)
            X1 = runs[0].X[:, k1 - j]
            X2 = runs[1].X[:, k2 - j]
            A1 = runs[0].A_cumulative()[:, k1 - j]
            A2 = runs[1].A_cumulative()[:, k2 - j]
            dx = np.max(np.linalg.norm(X1 - X2, axis=2), axis=1)
            da = np.max(np.abs(A1 - A2), axis=1)
        x_mom.append(float(np.mean(dx ** 4)))
        a_mom.append(float(np.mean(da ** 4)))
        scale.append(abs(t2 - t1) ** 2 + float(np.linalg.norm(x1a - x2a)) ** 4)
    x_mom, a_mom, scale = map(np.asarray, (x_mom, a_mom, scale))
    return ContinuityReport(list(pairs), x_mom, a_mom, scale, _ratio(x_mom, scale), _ratio(a_mom, scale))


def steps_for(t, grid):
    """Number of grid steps spanning remaining time ``t`` (must lie on the grid)."""
    k = int(round(t / grid.dt))
    if k < 0 or k > grid.N or abs(k * grid.dt - t) > 1e-9 * max(1.0, grid.T):
        raise ConfigurationError(f"time {t} is not a node of the grid with dt={grid.dt}")
    return k
