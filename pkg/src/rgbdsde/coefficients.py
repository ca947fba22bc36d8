"""Problem data, declared assumption constants and the penalized driver.

All callables are vectorised over scenarios and use the original time
variable:

* ``f(t, x, y, z) -> [M]``, ``phi(t, x, y) -> [M]``, ``g(t, x, y, z) -> [M, ell]``
* ``l(x) -> [M]`` terminal function of the forward state; ``xi`` a constant
  terminal value used when there is no forward state
* ``b(x) -> [M, d]``, ``sigma(x) -> [M, d, d]``

``x`` is ``[M, d]`` or ``None`` for the abstract problem without a forward
diffusion, ``y`` is ``[M]``, ``z`` is ``[M, d]``.
"""
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PreconditionError

VIOLATION_RTOL = 1e-9


@dataclass(frozen=True)
class Constants:
    """Declared constants: Lipschitz-squared ``c``, monotonicity ``beta`` of phi,
    z-coefficient ``alpha`` of g, growth ``K_lip`` and exponential weight ``mu``."""

    c: float = 1.0
    beta: float = -1.0
    alpha: float = 0.5
    K_lip: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}; the Picard map is not a contraction")
        if not self.beta < 0:
            raise ConfigurationError(f"beta must be strictly negative, got {self.beta}")
        if not self.c > 0:
            raise ConfigurationError(f"c must be positive, got {self.c}")
        if not self.K_lip > 0:
            raise ConfigurationError(f"K_lip must be positive, got {self.K_lip}")
        if not self.mu > 0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")

    @property
    def c_bar(self):
        return self.c / self.alpha


def _zeros_f(t, x, y, z):
    return np.zeros_like(y)


def _zeros_phi(t, x, y):
    return np.zeros_like(y)


@dataclass
class CoefficientSet:
    f: object = _zeros_f
    phi: object = _zeros_phi
    g: object = None
    xi: float = 0.0
    l: object = None
    b: object = None
    sigma: object = None
    constants: Constants = field(default_factory=Constants)
    ell: int = 1
    name: str = "custom"
    g_is_zero: bool = False

    def __post_init__(self):
        if self.g is None:
            ell = self.ell

            def g_zero(t, x, y, z):
                return np.zeros((np.shape(y)[0], ell))

            self.g = g_zero
            self.g_is_zero = True

    def eval_g(self, t, x, y, z):
        out = np.asarray(self.g(t, x, y, z), dtype=float)
        return out.reshape(np.shape(y)[0], -1)

    def terminal(self, x, count):
        """Terminal layer: ``l(x)`` when a forward state exists, else ``xi``."""
        if x is not None and self.l is not None:
            return np.broadcast_to(np.asarray(self.l(x), dtype=float), (count,)).astype(float)
        xi = self.xi(x) if callable(self.xi) else self.xi
        return np.broadcast_to(np.asarray(xi, dtype=float), (count,)).astype(float)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class ObstacleSpec:
    """Lower barrier: ``S(t)`` for the abstract problem, ``h(t, x)`` with a state."""

    S: object = None
    h: object = None
    enabled: bool = True
    name: str = "custom"

    def value(self, t, x=None, count=1):
        if x is not None and self.h is not None:
            return np.broadcast_to(np.asarray(self.h(t, x), dtype=float), (count,))
        if self.S is not None:
            return np.broadcast_to(np.asarray(self.S(t), dtype=float), (count,))
        if self.h is not None:
            raise PreconditionError("obstacle only defines h(t, x) but no state was given")
        raise PreconditionError("obstacle defines neither S nor h")


NO_OBSTACLE = ObstacleSpec(enabled=False, name="none")


def penalize(coeffs, obstacle, n):
    """Driver ``f_n = f + n (y - S)^-``; every other field is kept."""
    if obstacle is None or not obstacle.enabled:
        raise PreconditionError("penalization needs an enabled obstacle")
    if int(n) != n or n < 1:
        raise PreconditionError(f"penalty weight must be a positive integer, got {n}")
    base = coeffs.f

    def f_n(t, x, y, z):
        y = np.asarray(y, dtype=float)
        s = obstacle.value(t, x, y.shape[0])
        return base(t, x, y, z) + n * np.maximum(s - y, 0.0)

    return coeffs.replace(f=f_n, name=f"{coeffs.name}+penalty({n})")


# ---------------------------------------------------------------------------
# assumption checking


@dataclass
class Violation:
    name: str
    observed: float
    declared: float
    severity: str  # "error" or "warning"

    def __str__(self):
        return f"{self.name}: observed {self.observed:.6g} vs declared {self.declared:.6g} ({self.severity})"


@dataclass
class AssumptionReport:
    quotients: dict
    violations: list

    @property
    def errors(self):
        return [v for v in self.violations if v.severity == "error"]

    @property
    def ok(self):
        return not self.errors


def _norm_rows(a):
    return np.sqrt(np.sum(np.asarray(a, dtype=float) ** 2, axis=-1))


def validate_assumptions(coeffs, obstacle, sample_budget=256, seed=0, domain=None, T=1.0, d=None):
    """Sampling-based check of the declared constants.

    Lipschitz, z-coefficient and compatibility exceedances are errors; the
    monotonicity of phi and the growth bound are reported as warnings, since
    the scheme stays stable for phi with zero slope.
    """
    if sample_budget < 100:
        raise ConfigurationError("sample_budget must be at least 100")
    k = coeffs.constants
    if not 0 < k.alpha < 1:
        raise ConfigurationError(f"declared alpha={k.alpha} is outside (0, 1)")
    d = domain.dim if domain is not None else (d or 1)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(7,)))
    M = int(sample_budget)
    t = float(rng.uniform(0.0, T))
    x = domain.sample(rng, M) if domain is not None else None
    y1, y2 = rng.uniform(-5, 5, M), rng.uniform(-5, 5, M)
    z1, z2 = rng.uniform(-5, 5, (M, d)), rng.uniform(-5, 5, (M, d))
    tol = 1.0 + VIOLATION_RTOL
    quot, violations = {}, []

    def check(name, observed, declared, severity, upper=True):
        quot[name] = observed
        bad = observed > declared * tol if upper else observed > declared + VIOLATION_RTOL * abs(declared)
        if bad:
            violations.append(Violation(name, observed, declared, severity))

    with np.errstate(divide="ignore", invalid="ignore"):
        df = coeffs.f(t, x, y1, z1) - coeffs.f(t, x, y2, z2)
        q = np.max(df ** 2 / ((y1 - y2) ** 2 + _norm_rows(z1 - z2) ** 2))
        check("f_lipschitz", float(q), k.c, "error")
        dgy = _norm_rows(coeffs.eval_g(t, x, y1, z1) - coeffs.eval_g(t, x, y2, z1)) ** 2
        check("g_y_quotient", float(np.max(dgy / (y1 - y2) ** 2)), k.c, "error")
        dgz = _norm_rows(coeffs.eval_g(t, x, y1, z1) - coeffs.eval_g(t, x, y1, z2)) ** 2
        check("g_z_quotient", float(np.max(dgz / _norm_rows(z1 - z2) ** 2)), k.alpha, "error")
        dphi = coeffs.phi(t, x, y1) - coeffs.phi(t, x, y2)
        check("phi_monotonicity", float(np.max((y1 - y2) * dphi / (y1 - y2) ** 2)), k.beta, "warning", upper=False)
        xn = _norm_rows(x) if x is not None else 0.0
        scale = 1.0 + xn + np.abs(y1) + _norm_rows(z1)
        growth = max(
            float(np.max(np.abs(coeffs.f(t, x, y1, z1)) / scale)),
            float(np.max(_norm_rows(coeffs.eval_g(t, x, y1, z1)) / scale)),
            float(np.max(np.abs(coeffs.phi(t, x, y1)) / (1.0 + xn + np.abs(y1)))),
        )
        check("growth", growth, k.K_lip, "warning")

    if obstacle is not None and obstacle.enabled:
        # compatibility belongs at the terminal-condition index (time 0)
        if domain is not None and coeffs.l is not None:
            gap = coeffs.terminal(x, M) - obstacle.value(0.0, x, M)
        else:
            gap = coeffs.terminal(None, 1) - obstacle.value(0.0, None, 1)
        worst = float(np.min(gap))
        quot["compatibility_gap"] = worst
        if worst < -VIOLATION_RTOL:
            violations.append(Violation("compatibility", worst, 0.0, "error"))
    return AssumptionReport(quot, violations)


# ---------------------------------------------------------------------------
# built-in catalog

AFFINE_DEFAULTS = {
    "f_0": 0.0, "f_y": 0.0, "f_z": 0.0,
    "phi_0": 0.0, "phi_y": 0.0,
    "g_0": 0.0, "g_y": 0.0, "g_z": 0.0,
    "b_0": 0.0, "b_1": 0.0, "sigma": 0.0,
    "l_0": 0.0, "l_1": 0.0, "l_2": 0.0,
    "xi": 0.0, "d": 1, "ell": 1,
}
INTERCEPTS = ("f_0", "phi_0", "g_0", "b_0")


def _sumz(z):
    return np.sum(np.asarray(z, dtype=float), axis=-1)


def _state_sum(x):
    return 0.0 if x is None else np.sum(x, axis=1)


def _forward_parts(p, d):
    b0, b1, sig = float(p["b_0"]), float(p["b_1"]), float(p["sigma"])
    eye = np.eye(d)

    def b(x):
        return b0 + b1 * np.asarray(x, dtype=float)

    def sigma(x):
        return np.broadcast_to(sig * eye, (np.shape(x)[0], d, d))

    l0, l1, l2 = float(p["l_0"]), float(p["l_1"]), float(p["l_2"])

    def l(x):
        x = np.asarray(x, dtype=float)
        return l0 + l1 * np.sum(x, axis=1) + l2 * np.sum(x * (1.0 - x), axis=1)

    return b, sigma, l


def _constants(p, derived):
    over = dict(p.get("constants") or {})
    unknown = set(over) - {f.name for f in dataclasses.fields(Constants)}
    if unknown:
        raise ConfigurationError(f"unknown constants: {sorted(unknown)}")
    derived.update(over)
    return Constants(**derived)


def _check_params(family, params, allowed):
    extra = set(params) - set(allowed) - {"constants"}
    if extra:
        raise ConfigurationError(f"family {family!r} got unknown parameters: {sorted(extra)}")


def affine_family(params=None, name="affine", intercepts=True):
    params = dict(params or {})
    allowed = dict(AFFINE_DEFAULTS)
    if not intercepts:
        for key in INTERCEPTS:
            allowed.pop(key)
    _check_params(name, params, allowed)
    p = {**AFFINE_DEFAULTS, **params}
    d, ell = int(p["d"]), int(p["ell"])
    fy, fz, f0 = float(p["f_y"]), float(p["f_z"]), float(p["f_0"])
    py, p0 = float(p["phi_y"]), float(p["phi_0"])
    gy, gz, g0 = float(p["g_y"]), float(p["g_z"]), float(p["g_0"])

    def f(t, x, y, z):
        return f0 + fy * y + fz * _sumz(z)

    def phi(t, x, y):
        return p0 + py * y

    g = None
    if gy or gz or g0:
        def g(t, x, y, z):
            v = g0 + gy * y + gz * _sumz(z)
            return np.repeat(np.asarray(v, dtype=float)[:, None], ell, axis=1)

    b, sigma, l = _forward_parts(p, d)
    c_f = fy ** 2 + d * fz ** 2
    if gz and gy:
        c_g, alpha = 2 * ell * gy ** 2, 2 * ell * d * gz ** 2
    else:
        c_g, alpha = ell * gy ** 2, ell * d * gz ** 2
    K = max(abs(f0), abs(fy), math.sqrt(d) * abs(fz), abs(p0), abs(py),
            math.sqrt(ell) * max(abs(g0), abs(gy), math.sqrt(d) * abs(gz)),
            abs(float(p["b_0"])), abs(float(p["b_1"])), abs(float(p["sigma"])))
    derived = {
        "c": max(c_f, c_g) or 1.0,
        "beta": py if py < 0 else -1.0,
        "alpha": alpha if 0 < alpha < 1 else (0.5 if alpha == 0 else alpha),
        "K_lip": K or 1.0,
        "mu": 1.0,
    }
    return CoefficientSet(f=f, phi=phi, g=g, xi=float(p["xi"]), l=l, b=b, sigma=sigma,
                          constants=_constants(params, derived), ell=ell, name=name)


def linear_family(params=None):
    """Drivers linear in (y, z) with no intercepts."""
    return affine_family(params, name="linear", intercepts=False)


SATURATING_DEFAULTS = {
    "f_amp": 1.0, "f_x": 0.0, "phi_y": -1.0, "g_amp": 0.0,
    "b_0": 0.0, "b_1": 0.0, "sigma": 0.5,
    "l_0": 1.0, "l_1": 0.0, "l_2": 0.0, "xi": 0.0, "d": 1, "ell": 1,
}


def saturating_family(params=None):
    """Bounded smooth drivers: ``f = f_amp tanh(y) + f_x sin(sum x)``, ``g = g_amp tanh(y)``."""
    params = dict(params or {})
    _check_params("saturating", params, SATURATING_DEFAULTS)
    p = {**SATURATING_DEFAULTS, **params}
    d, ell = int(p["d"]), int(p["ell"])
    fa, fx, py, ga = float(p["f_amp"]), float(p["f_x"]), float(p["phi_y"]), float(p["g_amp"])

    def f(t, x, y, z):
        return fa * np.tanh(y) + fx * np.sin(_state_sum(x))

    def phi(t, x, y):
        return py * y

    g = None
    if ga:
        def g(t, x, y, z):
            return np.repeat((ga * np.tanh(y))[:, None], ell, axis=1)

    b, sigma, l = _forward_parts(p, d)
    derived = {
        "c": max(fa ** 2, ell * ga ** 2) or 1.0,
        "beta": py if py < 0 else -1.0,
        "alpha": 0.5,
        "K_lip": max(abs(fa), abs(fx), abs(py), math.sqrt(ell) * abs(ga),
                     abs(float(p["b_0"])), abs(float(p["b_1"])), abs(float(p["sigma"]))) or 1.0,
        "mu": 1.0,
    }
    return CoefficientSet(f=f, phi=phi, g=g, xi=float(p["xi"]), l=l, b=b, sigma=sigma,
                          constants=_constants(params, derived), ell=ell, name="saturating")


# closed-form test cases, expressed as affine parameter bundles
PRESETS = {
    # zero drivers, xi = 0: the ramp-obstacle problem of the penalization tests
    "ramp": {"xi": 0.0},
    # interval(0,1), b = -1, sigma = 0, phi(y) = -y, l = 1: the path pins at 0
    "pinned": {"b_0": -1.0, "phi_y": -1.0, "l_0": 1.0},
    # sigma = 0.5, b = -0.2 x, phi(u) = -u, l = 1 + x(1-x)/2, g = f = 0
    "neumann_heat": {"b_1": -0.2, "sigma": 0.5, "phi_y": -1.0, "l_0": 1.0, "l_2": 0.5},
    # l = xi = 1, everything else zero
    "constant": {"l_0": 1.0, "xi": 1.0},
}


def _preset(name):
    def build(params=None):
        params = dict(params or {})
        merged = {**PRESETS[name], **params}
        return affine_family(merged, name=name)

    build.__doc__ = f"Preset {name!r} of the affine family."
    return build


FAMILIES = {
    "affine": affine_family,
    "linear": linear_family,
    "saturating": saturating_family,
    **{name: _preset(name) for name in PRESETS},
}


def build_coefficients(family, params=None):
    try:
        builder = FAMILIES[family]
    except KeyError:
        raise ConfigurationError(f"unknown coefficient family {family!r}; known: {sorted(FAMILIES)}") from None
    return builder(params)


# ---------------------------------------------------------------------------
# obstacle catalog


def ramp_obstacle(slope=1.0, offset=0.0, x_coef=0.0):
    """``S(t) = slope t + offset``; with a state, ``h(t, x) = S(t) + x_coef sum(x)``."""
    slope, offset, x_coef = float(slope), float(offset), float(x_coef)

    def S(t):
        return slope * t + offset

    def h(t, x):
        return slope * t + offset + x_coef * np.sum(x, axis=1)

    return ObstacleSpec(S=S, h=h, enabled=True, name="ramp")


def constant_obstacle(level=0.0):
    return ramp_obstacle(0.0, level)


OBSTACLES = {
    "none": lambda: NO_OBSTACLE,
    "ramp": ramp_obstacle,
    "constant": constant_obstacle,
}


def build_obstacle(kind="none", params=None):
    try:
        builder = OBSTACLES[kind]
    except KeyError:
        raise ConfigurationError(f"unknown obstacle kind {kind!r}; known: {sorted(OBSTACLES)}") from None
    try:
        return builder(**dict(params or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for obstacle {kind!r}: {exc}") from None
