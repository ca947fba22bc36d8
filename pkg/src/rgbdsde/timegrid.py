"""Uniform time grids and the two independent Gaussian drivers W and B.

Noise is generated from counter-based Philox substreams keyed by
``(seed, driver tag, scenario index)``, so each scenario's increments do not
depend on how many other scenarios are drawn or in which order.

Increment arrays are indexed by *original-time step*: step ``j`` covers
``[j dt, (j + 1) dt]`` of the original (time-reversed) problem.  Solvers run in
standard forward orientation and consume :meth:`NoisePaths.internal_view`.
"""
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SEED_ENV = "RGBDSDE_SEED"
W_TAG = 0
B_TAG = 1


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int
    times: np.ndarray

    @property
    def dt(self):
        return self.T / self.N


def make_grid(T, N):
    """Uniform grid with ``N`` steps on ``[0, T]``."""
    if not np.isfinite(T) or T <= 0:
        raise ConfigurationError(f"horizon T must be positive, got {T!r}")
    if int(N) != N or N < 1:
        raise ConfigurationError(f"step count N must be a positive integer, got {N!r}")
    N = int(N)
    times = np.arange(N + 1) * (float(T) / N)
    times[-1] = float(T)
    times.setflags(write=False)
    return TimeGrid(float(T), N, times)


def resolve_seed(seed):
    """Apply the ``RGBDSDE_SEED`` override; returns a non-negative int."""
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"{SEED_ENV}={env!r} is not an integer") from exc
    if seed is None:
        raise ConfigurationError("a seed is required")
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ConfigurationError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def _stream(seed, tag, index):
    ss = np.random.SeedSequence(seed, spawn_key=(tag, index))
    return np.random.Generator(np.random.Philox(ss))


def _draw(seed, tag, count, n_steps, dim, dt):
    out = np.empty((count, n_steps, dim))
    scale = np.sqrt(dt)
    for m in range(count):
        out[m] = _stream(seed, tag, m).standard_normal((n_steps, dim)) * scale
    return out


@dataclass(frozen=True)
class NoisePaths:
    w_increments: np.ndarray  # [M_inner, N, d]
    b_increments: np.ndarray  # [M_outer, N, ell]
    seed: int
    dt: float

    @property
    def stream_ids(self):
        """(driver tag, scenario index) pairs, W streams first."""
        w = [(W_TAG, m) for m in range(self.w_increments.shape[0])]
        b = [(B_TAG, m) for m in range(self.b_increments.shape[0])]
        return w + b

    @property
    def n_steps(self):
        return self.w_increments.shape[1]

    def internal_view(self, k):
        """Increments for a forward run of ``k`` steps ending at original time 0.

        Internal step ``i`` uses original step ``k - 1 - i``; the result is a new
        NoisePaths in internal orientation.
        """
        if k < 0 or k > self.n_steps:
            raise ConfigurationError(f"cannot take {k} steps from a {self.n_steps}-step noise sample")
        return NoisePaths(
            self.w_increments[:, k - 1::-1, :] if k else self.w_increments[:, :0, :],
            self.b_increments[:, k - 1::-1, :] if k else self.b_increments[:, :0, :],
            self.seed,
            self.dt,
        )

    def w_paths(self):
        """Path values of W (prefix sums), [M_inner, N+1, d]."""
        w = self.w_increments
        return np.concatenate([np.zeros((w.shape[0], 1, w.shape[2])), np.cumsum(w, axis=1)], axis=1)


def sample_paths(grid, d, ell, M_inner, M_outer, seed):
    """Draw W (d-dim, M_inner scenarios) and B (ell-dim, M_outer paths) increments."""
    for name, value in (("d", d), ("ell", ell), ("M_inner", M_inner), ("M_outer", M_outer)):
        if int(value) != value or value < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    if seed is None or int(seed) < 0:
        raise ConfigurationError(f"seed must be a non-negative integer, got {seed!r}")
    seed = int(seed)
    w = _draw(seed, W_TAG, int(M_inner), grid.N, int(d), grid.dt)
    b = _draw(seed, B_TAG, int(M_outer), grid.N, int(ell), grid.dt)
    w.setflags(write=False)
    b.setflags(write=False)
    return NoisePaths(w, b, seed, grid.dt)


@dataclass
class DriverMoments:
    mean: float
    variance: float
    max_abs: float
    flagged: bool


@dataclass
class MomentReport:
    w: DriverMoments
    b: DriverMoments
    dt: float

    @property
    def flags(self):
        return [name for name, m in (("W", self.w), ("B", self.b)) if m.flagged]


def _driver_moments(inc, dt):
    inc = np.asarray(inc, dtype=float)
    if inc.size == 0:
        return DriverMoments(0.0, 0.0, 0.0, True)
    # known-mean second moment: the increments are centred by construction
    var = float(np.mean(inc * inc))
    flagged = not (0.5 * dt <= var <= 2.0 * dt)
    return DriverMoments(float(np.mean(inc)), var, float(np.max(np.abs(inc))), flagged)


def moment_report(paths):
    """Pooled mean, variance and max |increment| per driver, with variance flags."""
    return MomentReport(_driver_moments(paths.w_increments, paths.dt),
                        _driver_moments(paths.b_increments, paths.dt), paths.dt)
