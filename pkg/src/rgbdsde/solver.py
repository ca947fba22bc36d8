"""Backward regression scheme for reflected generalized BDSDEs.

Everything here runs in standard orientation: node ``i`` of a grid with
horizon ``T`` sits at original time ``T - times[i]``; node ``N`` holds
the terminal condition and node 0 the solution value.  Per fixed outer
B-path, conditional expectations are regressions over the inner W-cloud on
monomials of the forward state ``X_i``.

One backward step, with ``Y' = Y_{i+1}``::

    Z_i  = E[(Y' - E[Y' | X_i]) dW_i | X_i] / dt
    yhat = E[Y' + f(t_i, X_i, Y', Z_i) dt + phi(t_i, X_i, Y') dA_i
             + <g(t_{i+1}, X_{i+1}, Y', Z_i), dB_i> | X_i]

then either the reflection ``Y_i = max(yhat, S_i)`` or the closed-form
implicit penalty ``Y_i = yhat + n dt (S_i - Y_i)^+``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .coefficients import validate_assumptions
from .diffusion import DiffusionSpec, ReflectedPathBundle, simulate_reflected
from .errors import AssumptionError, ConfigurationError, ConvergenceError, NumericError, PreconditionError
from .regression import basis_size, regress_conditional
from .timegrid import make_grid, sample_paths

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    T: float = 1.0
    N: int = 64
    M_inner: int = 4096
    M_outer: int = 1
    degree: int = 2
    penalty_n: int = None
    picard_max: int = 20
    picard_tol: float = 1e-8
    seed: int = 0
    check_assumptions: bool = True

    def __post_init__(self):
        if self.M_inner < 1 or self.M_outer < 1:
            raise ConfigurationError("scenario counts must be positive")
        if self.degree < 0:
            raise ConfigurationError("regression degree must be non-negative")
        if not self.picard_tol > 0:
            raise ConfigurationError("picard_tol must be positive")
        if self.picard_max < 1:
            raise ConfigurationError("picard_max must be at least 1")
        if self.penalty_n is not None and self.penalty_n < 0:
            raise ConfigurationError("penalty_n must be non-negative")
        self.grid  # validates T and N

    @property
    def grid(self):
        return make_grid(self.T, self.N)

    def with_(self, **changes):
        d = dict(self.__dict__)
        d.update(changes)
        return SolverConfig(**d)


@dataclass
class BdsdeSolution:
    """Arrays are indexed [outer, inner, node]; K accumulates from the terminal node."""

    Y: np.ndarray  # [Mo, Mi, N+1]
    Z: np.ndarray  # [Mo, Mi, N, d]
    dK: np.ndarray  # [Mo, Mi, N], increment produced at node i
    S: np.ndarray  # [Mi, N+1] obstacle at the nodes, or None
    grid: object
    bundle: ReflectedPathBundle = None
    mode: str = "penalized"
    diagnostics: dict = field(default_factory=dict)

    @property
    def K(self):
        out = np.zeros(self.Y.shape)
        out[..., :-1] = np.cumsum(self.dK[..., ::-1], axis=-1)[..., ::-1]
        return out

    @property
    def K_total(self):
        return self.dK.sum(axis=-1)

    def node_for_time(self, t):
        """Internal node of original time ``t``."""
        k = int(round(t / self.grid.dt))
        if abs(k * self.grid.dt - t) > 1e-9 * max(1.0, self.grid.T) or not 0 <= k <= self.grid.N:
            raise ConfigurationError(f"time {t} is not a grid node")
        return self.grid.N - k

    def at_time(self, t):
        return self.Y[..., self.node_for_time(t)]

    def original_times(self):
        return self.grid.T - self.grid.times

    def A_backward(self):
        if self.bundle is None:
            return np.zeros(self.Y.shape[1:])
        return self.bundle.A_backward()

    def dA(self):
        if self.bundle is None:
            return np.zeros(self.dK.shape[1:])
        return self.bundle.dA


@dataclass
class _Problem:
    grid: object
    X: np.ndarray  # [Mi, N+1, d] or None
    dA: np.ndarray  # [Mi, N]
    dW: np.ndarray  # [Mi, N, d]
    dB: np.ndarray  # [Mo, N, ell]
    bundle: ReflectedPathBundle


def prepare(coeffs, dom, paths, config, x0=None, view=True):
    """Simulate the forward state and collect noise in internal orientation.

    ``paths`` is indexed by original-time step; when ``view`` is true the
    internal view of ``grid.N`` steps is taken here.
    """
    grid = config.grid
    d = dom.dim if dom is not None else 1
    if paths is None:
        paths = sample_paths(grid, d, coeffs.ell, config.M_inner, config.M_outer, config.seed)
    if view:
        paths = paths.internal_view(grid.N)
    if paths.w_increments.shape[2] != d:
        raise ConfigurationError(f"W has dimension {paths.w_increments.shape[2]}, expected {d}")
    if paths.b_increments.shape[2] != coeffs.ell:
        raise ConfigurationError(f"B has dimension {paths.b_increments.shape[2]}, coefficients use {coeffs.ell}")
    Mi = paths.w_increments.shape[0]
    if dom is not None:
        start = dom.center if x0 is None else x0
        spec = DiffusionSpec(coeffs.b, coeffs.sigma, start, coeffs.constants.K_lip)
        bundle = simulate_reflected(spec, dom, grid, paths)
        X, dA = bundle.X, bundle.dA
    else:
        bundle, X, dA = None, None, np.zeros((Mi, grid.N))
    return _Problem(grid, X, dA, paths.w_increments[:, :grid.N], paths.b_increments[:, :grid.N], bundle)


def _degenerate(x):
    return x is None or np.all(np.ptp(x, axis=0) == 0)


def _conditional(x, arr, degree):
    """E[arr | x] along the inner axis (axis 1) of ``arr``, shape preserved."""
    if _degenerate(x):
        if arr.shape[1] == 1:
            return arr.copy()
        return np.broadcast_to(arr.mean(axis=1, keepdims=True), arr.shape).copy()
    Mo, Mi = arr.shape[:2]
    rest = arr.shape[2:]
    flat = np.moveaxis(arr, 1, 0).reshape(Mi, -1)
    _, fitted = regress_conditional(x, flat, degree)
    return np.moveaxis(fitted.reshape((Mi, Mo) + rest), 0, 1)


def _sweep(coeffs, obstacle, prob, degree, reflect, ndt_factor, frozen=None):
    grid = prob.grid
    N, dt = grid.N, grid.dt
    Mi, _, d = prob.dW.shape
    Mo = prob.dB.shape[0]
    times = grid.T - grid.times  # original time of each node
    X = prob.X
    active = obstacle is not None and obstacle.enabled

    Y = np.empty((Mo, Mi, N + 1))
    Z = np.zeros((Mo, Mi, N, d))
    dK = np.zeros((Mo, Mi, N))
    S = None
    if active:
        S = np.empty((Mi, N + 1))
        for i in range(N + 1):
            S[:, i] = obstacle.value(times[i], None if X is None else X[:, i], Mi)

    x_end = None if X is None else X[:, N]
    Y[:, :, N] = coeffs.terminal(x_end, Mi)[None, :]
    if not np.all(np.isfinite(Y[:, :, N])):
        raise NumericError("non-finite terminal condition", step=N)

    if X is not None and not _degenerate(X[:, 1:]) and Mi < 10 * basis_size(d, degree):
        raise PreconditionError(f"M_inner={Mi} is too small for a degree-{degree} basis in {d} dimensions")

    def tile(a):
        return None if a is None else np.tile(a, (Mo, 1))

    for i in range(N - 1, -1, -1):
        xi = None if X is None else X[:, i]
        y_next = Y[:, :, i + 1]
        try:
            # centring on E[Y'|X_i] leaves the estimator unbiased and makes Z vanish
            # exactly when Y' carries no W-noise
            centred = y_next - _conditional(xi, y_next, degree)
            z = _conditional(xi, centred[:, :, None] * prob.dW[None, :, i, :] / dt, degree)
            yf, zf, xf = y_next.ravel(), z.reshape(-1, d), tile(xi)
            target = yf + coeffs.f(times[i], xf, yf, zf) * dt
            if prob.bundle is not None:
                target = target + coeffs.phi(times[i], xf, yf) * np.tile(prob.dA[:, i], Mo)
            if not coeffs.g_is_zero:
                x_next = tile(None if X is None else X[:, i + 1])
                if frozen is None:
                    gv = coeffs.eval_g(times[i + 1], x_next, yf, zf)
                else:
                    gv = coeffs.eval_g(times[i + 1], x_next, frozen[0][:, :, i + 1].ravel(),
                                       frozen[1][:, :, i].reshape(-1, d))
                db = np.repeat(prob.dB[:, i, :], Mi, axis=0)
                target = target + np.sum(gv * db, axis=1)
            yhat = _conditional(xi, target.reshape(Mo, Mi), degree)
        except (NumericError, np.linalg.LinAlgError) as exc:
            raise NumericError(f"backward step failed: {exc}", step=i) from exc
        if not np.all(np.isfinite(yhat)):
            raise NumericError("non-finite value in backward recursion", step=i)
        Z[:, :, i] = z
        if active:
            y, k = _kernels.obstacle_step(yhat.ravel(), np.tile(S[:, i], Mo), ndt_factor * dt, reflect)
            Y[:, :, i] = y.reshape(Mo, Mi)
            dK[:, :, i] = k.reshape(Mo, Mi)
        else:
            Y[:, :, i] = yhat
    return Y, Z, dK, S


def _check(coeffs, obstacle, dom, config):
    if not config.check_assumptions:
        return None
    report = validate_assumptions(coeffs, obstacle, 256, config.seed, domain=dom, T=config.T)
    if not report.ok:
        raise AssumptionError("assumption check failed: " + "; ".join(map(str, report.errors)), report)
    for v in report.violations:
        log.info("assumption warning: %s", v)
    return report


def _finish(Y, Z, dK, S, prob, mode, coeffs, obstacle):
    sol = BdsdeSolution(Y, Z, dK, S, prob.grid, prob.bundle, mode)
    diag = {"mode": mode}
    if S is not None:
        diag["skorokhod_residual"] = skorokhod_residual(sol, obstacle)
        diag["min_gap"] = float(np.min(Y - S[None]))
    energy = energy_statistic(sol, prob.bundle, coeffs.constants.mu)
    diag["energy"] = energy.__dict__
    sol.diagnostics = diag
    return sol


def solve_penalized(coeffs, obstacle, n, dom=None, paths=None, config=None, x0=None):
    """Penalized equation with weight ``n``; ``n = 0`` or a disabled obstacle is unconstrained."""
    config = config or SolverConfig()
    if n < 0:
        raise ConfigurationError("penalty weight must be non-negative")
    _check(coeffs, obstacle, dom, config)
    prob = prepare(coeffs, dom, paths, config, x0)
    Y, Z, dK, S = _sweep(coeffs, obstacle, prob, config.degree, False, float(n))
    return _finish(Y, Z, dK, S, prob, "penalized", coeffs, obstacle)


def solve_reflected(coeffs, obstacle, dom=None, paths=None, config=None, x0=None):
    """Direct reflection ``Y_i = max(yhat_i, S_i)`` at every node."""
    config = config or SolverConfig()
    _check(coeffs, obstacle, dom, config)
    prob = prepare(coeffs, dom, paths, config, x0)
    Y, Z, dK, S = _sweep(coeffs, obstacle, prob, config.degree, True, 0.0)
    return _finish(Y, Z, dK, S, prob, "reflected", coeffs, obstacle)


def picard_solve(coeffs, obstacle, dom=None, paths=None, config=None, x0=None):
    """Fixed point of the map freezing (Y, Z) inside g.

    Starts from (0, 0); each iteration solves the reflected equation with g
    evaluated on the previous iterate.  Returns ``(solution, history)`` where
    ``history`` holds the weighted-norm distances between successive iterates.
    """
    config = config or SolverConfig()
    k = coeffs.constants
    if not 0 < k.alpha < 1:
        raise ConfigurationError(f"declared alpha={k.alpha} is outside (0, 1)")
    _check(coeffs, obstacle, dom, config)
    prob = prepare(coeffs, dom, paths, config, x0)
    reflect = obstacle is not None and obstacle.enabled
    Mi, N, d = prob.dW.shape
    Mo = prob.dB.shape[0]
    Ybar = np.zeros((Mo, Mi, N + 1))
    Zbar = np.zeros((Mo, Mi, N, d))
    A = prob.bundle.A_backward() if prob.bundle is not None else None
    dA = prob.dA
    history = []
    for _ in range(config.picard_max):
        Y, Z, dK, S = _sweep(coeffs, obstacle, prob, config.degree, reflect, 0.0, frozen=(Ybar, Zbar))
        delta = weighted_norm(Y - Ybar, Z - Zbar, A, prob.grid, k, dA=dA)
        history.append(delta)
        Ybar, Zbar = Y, Z
        if delta < config.picard_tol:
            sol = _finish(Y, Z, dK, S, prob, "picard", coeffs, obstacle)
            sol.diagnostics["picard_history"] = list(history)
            return sol, history
    raise ConvergenceError(f"Picard iteration did not reach {config.picard_tol} in {config.picard_max} steps",
                           history=history)


# ---------------------------------------------------------------------------
# diagnostics


def weighted_norm(Y, Z, A, grid, constants, dA=None):
    """Discrete exponentially weighted norm of (Y, Z).

    ``c_bar sum e^{mu s + beta A} |Y|^2 dt + |beta| sum e^{...} |Y|^2 dA
    + sum e^{...} |Z|^2 dt``, averaged over all leading (scenario) axes, where
    ``s`` is original time and ``A`` the local time accrued since the terminal
    node.  ``A`` and ``dA`` may be None (no boundary).
    """
    Y = np.asarray(Y, dtype=float)
    N = grid.N
    s = (grid.T - grid.times)[:N]
    A_nodes = np.zeros(N) if A is None else np.asarray(A, dtype=float)[..., :N]
    w = np.exp(constants.mu * s + constants.beta * A_nodes)
    y2 = Y[..., :N] ** 2
    z2 = np.sum(np.asarray(Z, dtype=float) ** 2, axis=-1)
    total = constants.c_bar * np.sum(w * y2, axis=-1) * grid.dt + np.sum(w * z2, axis=-1) * grid.dt
    if dA is not None:
        total = total + abs(constants.beta) * np.sum(w * y2 * dA, axis=-1)
    return float(np.mean(total))


def skorokhod_residual(sol, obstacle):
    """Mean over paths of sum_i (Y_i - S_i) dK_i: zero when reflected, <= 0 when penalized."""
    if obstacle is None or not obstacle.enabled or sol.S is None:
        raise PreconditionError("Skorokhod residual needs an enabled obstacle")
    gap = sol.Y[..., :-1] - sol.S[None, :, :-1]
    return float(np.mean(np.sum(gap * sol.dK, axis=-1)))


@dataclass
class EnergyStats:
    e_sup: float
    e_dA: float
    e_Z: float
    e_K: float

    @property
    def total(self):
        return self.e_sup + self.e_dA + self.e_Z + self.e_K


def energy_statistic(sol, bundle=None, mu=1.0):
    """Sample versions of the a-priori energy terms, weighted by e^{mu A}."""
    N = sol.grid.N
    if bundle is None:
        A = np.zeros(sol.Y.shape[1:])
        dA = np.zeros((sol.Y.shape[1], N))
    else:
        A, dA = bundle.A_backward(), bundle.dA
    w = np.exp(mu * A)[None]
    y2 = sol.Y ** 2
    e_sup = np.mean(np.max(w * y2, axis=-1))
    e_dA = np.mean(np.sum(w[..., :N] * y2[..., :N] * dA[None], axis=-1))
    e_Z = np.mean(np.sum(w[..., :N] * np.sum(sol.Z ** 2, axis=-1), axis=-1)) * sol.grid.dt
    e_K = np.mean(sol.K_total ** 2)
    return EnergyStats(float(e_sup), float(e_dA), float(e_Z), float(e_K))
