"""1D finite differences for the obstacle problem with nonlinear Neumann boundary.

Solves, forward in time from ``u(0, x) = l(x)`` on an interval::

    min{u - h, du/dt - (1/2 sigma^2 u_xx + b u_x) - f(t, x, u, sigma u_x)} = 0
    du/dn + phi(t, x, u) = 0      on the boundary (n = inward normal)

Implicit Euler in time, centred differences in space, ghost nodes for the
Neumann condition with one fixed-point pass on ``phi`` per step, and a
penalty iteration for the obstacle.  Only the deterministic case ``g = 0``.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ConvergenceError, PreconditionError

PENALTY_TOL = 1e-8
PENALTY_START = 1e2
PENALTY_RAMPS = 8
ACTIVE_SET_ITERS = 50


@dataclass(frozen=True)
class FdMesh:
    lo: float
    hi: float
    J: int  # space intervals
    N_fd: int  # time steps
    T: float

    def __post_init__(self):
        if not self.hi > self.lo or self.J < 2 or self.N_fd < 1 or not self.T > 0:
            raise ConfigurationError(f"invalid mesh {self}")

    @property
    def dx(self):
        return (self.hi - self.lo) / self.J

    @property
    def dt(self):
        return self.T / self.N_fd

    @property
    def x(self):
        return self.lo + self.dx * np.arange(self.J + 1)

    @property
    def t(self):
        return self.dt * np.arange(self.N_fd + 1)


@dataclass
class FdSolution:
    mesh: FdMesh
    u: np.ndarray  # [N_fd+1, J+1]
    penalty_iterations: np.ndarray  # per step
    residuals: np.ndarray = field(default=None)

    def at(self, t, x):
        """Bilinear interpolation on the mesh."""
        m = self.mesh
        eps = 1e-12 * max(1.0, m.T)
        if not (-eps <= t <= m.T + eps and m.lo - 1e-12 <= x <= m.hi + 1e-12):
            raise ConfigurationError(f"probe ({t}, {x}) lies outside the mesh")
        ts = np.clip(t, 0.0, m.T) / m.dt
        k = min(int(np.floor(ts)), m.N_fd - 1)
        w = ts - k
        row = (1 - w) * self.u[k] + w * self.u[k + 1]
        return float(np.interp(np.clip(x, m.lo, m.hi), m.x, row))

    def to_rows(self):
        m = self.mesh
        for k, t in enumerate(m.t):
            for j, x in enumerate(m.x):
                yield t, x, self.u[k, j]


def _coeff_on_nodes(coeffs, x):
    xs = x[:, None]
    b = np.asarray(coeffs.b(xs), dtype=float).reshape(-1)
    s = np.asarray(coeffs.sigma(xs), dtype=float).reshape(-1)
    return b, s


def solve_obstacle_pde_1d(coeffs, obstacle, mesh):
    """March the obstacle problem on ``mesh``; obstacle may be None or disabled."""
    if not coeffs.g_is_zero:
        raise PreconditionError("the finite-difference oracle only covers g = 0")
    if coeffs.l is None:
        raise PreconditionError("the finite-difference oracle needs an initial function l(x)")
    x = mesh.x
    xs = x[:, None]
    J, dx, dt = mesh.J, mesh.dx, mesh.dt
    b, sig = _coeff_on_nodes(coeffs, x)
    a = 0.5 * sig ** 2
    if np.any(a <= 0):
        raise PreconditionError("the finite-difference oracle needs sigma > 0 on every node")
    peclet = np.max(np.abs(b) * dx / sig ** 2)
    if peclet > 2:
        warnings.warn(f"mesh Peclet number {peclet:.3g} exceeds 2; centred differences may oscillate")

    # implicit operator rows: u_j - dt (a D2 + b D1) u_j
    lower = -dt * (a / dx ** 2 - b / (2 * dx))
    upper = -dt * (a / dx ** 2 + b / (2 * dx))
    diag = 1.0 + 2.0 * dt * a / dx ** 2
    # ghost nodes: u_{-1} = u_1 + 2 dx phi_0, u_{J+1} = u_{J-1} + 2 dx phi_J
    lower_g, upper_g = lower.copy(), upper.copy()
    upper_g[0] = upper[0] + lower[0]
    lower_g[J] = lower[J] + upper[J]
    lower_g[0] = 0.0
    upper_g[J] = 0.0

    active = obstacle is not None and obstacle.enabled
    u = np.empty((mesh.N_fd + 1, J + 1))
    u[0] = np.asarray(coeffs.l(xs), dtype=float)
    iters = np.zeros(mesh.N_fd, dtype=int)
    residuals = np.zeros(mesh.N_fd)

    for k in range(mesh.N_fd):
        t_new = mesh.t[k + 1]
        prev = u[k]
        grad = np.gradient(prev, dx)
        rhs0 = prev + dt * np.asarray(coeffs.f(t_new, xs, prev, (sig * grad)[:, None]), dtype=float)
        h = obstacle.value(t_new, xs, J + 1) if active else None

        def solve_with(boundary_u, pen_diag=None, pen_rhs=None):
            phi = np.asarray(coeffs.phi(t_new, xs[[0, -1]], boundary_u), dtype=float)
            rhs = rhs0.copy()
            rhs[0] -= lower[0] * 2 * dx * phi[0]
            rhs[J] -= upper[J] * 2 * dx * phi[1]
            dg = diag
            if pen_diag is not None:
                dg = diag + pen_diag
                rhs = rhs + pen_rhs
            return _kernels.thomas(lower_g, dg, upper_g, rhs)

        def penalised(boundary_u):
            if not active:
                return solve_with(boundary_u), 0, 0.0
            count = 0
            rho = PENALTY_START
            sol = solve_with(boundary_u)
            for _ in range(PENALTY_RAMPS + 1):
                mask = sol < h
                for _ in range(ACTIVE_SET_ITERS):
                    count += 1
                    pen = dt * rho * mask
                    sol = solve_with(boundary_u, pen, pen * h)
                    new_mask = sol < h
                    if np.array_equal(new_mask, mask):
                        break
                    mask = new_mask
                resid = float(np.max(np.maximum(h - sol, 0.0)))
                if resid < PENALTY_TOL:
                    return sol, count, resid
                rho *= 10.0
            raise ConvergenceError(f"penalty iteration stalled at step {k + 1}", residual=resid)

        # one fixed-point pass on the boundary nonlinearity
        guess, c1, _ = penalised(prev[[0, -1]])
        u[k + 1], c2, residuals[k] = penalised(guess[[0, -1]])
        iters[k] = c1 + c2
    return FdSolution(mesh, u, iters, residuals)


@dataclass
class ErrorReport:
    probes: list
    mc: np.ndarray
    fd: np.ndarray
    abs_error: np.ndarray
    rel_error: np.ndarray  # relative to the FD solution range
    fd_range: float

    @property
    def max_abs(self):
        return float(np.max(self.abs_error))

    @property
    def max_rel(self):
        return float(np.max(self.rel_error))

    def table(self):
        rows = []
        for (t, x), m, f, ea, er in zip(self.probes, self.mc, self.fd, self.abs_error, self.rel_error):
            rows.append({"t": t, "x": x, "mc": float(m), "fd": float(f),
                         "abs_error": float(ea), "rel_error": float(er)})
        return rows


def compare_mc_fd(field, fd, probes=None):
    """Per-probe |mean MC value - FD value|, absolute and relative to the FD range."""
    probes = list(field.probes if probes is None else probes)
    index = {(float(t), float(np.atleast_1d(x)[0])): j for j, (t, x) in enumerate(field.probes)}
    mc, ref = [], []
    for t, x in probes:
        x0 = float(np.atleast_1d(x)[0])
        try:
            j = index[(float(t), x0)]
        except KeyError:
            raise ConfigurationError(f"probe ({t}, {x0}) is not in the field table") from None
        mc.append(field.mean[j])
        ref.append(fd.at(float(t), x0))
    mc, ref = np.asarray(mc), np.asarray(ref)
    rng = float(np.ptp(fd.u))
    err = np.abs(mc - ref)
    rel = err / rng if rng > 0 else np.where(err > 0, np.inf, 0.0)
    return ErrorReport([(float(t), float(np.atleast_1d(x)[0])) for t, x in probes], mc, ref, err, rel, rng)
