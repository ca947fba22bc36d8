"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with identical floating-point semantics.
Set ``RGBDSDE_NUMBA=0`` in the environment to force the numpy path (useful for
debugging and for the benchmark in ``benchmarks/bench_kernels.py``).  The
choice is made once, at import time.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_flag = os.environ.get("RGBDSDE_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(func):
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


# --------------------------------------------------------------------------
# tridiagonal solve


def thomas_numpy(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    out = np.empty(n)
    out[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


@_njit
def _thomas_nb(lower, diag, upper, rhs):
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    out = np.empty(n)
    out[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


# --------------------------------------------------------------------------
# projections onto the built-in convex domains


def project_interval_numpy(x, lo, hi):
    """Clip a flat array onto [lo, hi]; returns (projected, displacement)."""
    proj = np.minimum(np.maximum(x, lo), hi)
    return proj, np.abs(x - proj)


@_njit
def _project_interval_nb(x, lo, hi):
    n = x.shape[0]
    proj = np.empty(n)
    disp = np.empty(n)
    for m in range(n):
        v = x[m]
        if v < lo:
            proj[m] = lo
            disp[m] = lo - v
        elif v > hi:
            proj[m] = hi
            disp[m] = v - hi
        else:
            proj[m] = v
            disp[m] = 0.0
    return proj, disp


def project_ball_numpy(x, center, radius):
    """Radial projection of rows of ``x`` onto the closed ball."""
    offset = x - center
    r = np.sqrt(np.sum(offset * offset, axis=1))
    outside = r > radius
    scale = np.ones_like(r)
    scale[outside] = radius / r[outside]
    proj = np.where(outside[:, None], center + offset * scale[:, None], x)
    disp = np.where(outside, r - radius, 0.0)
    return proj, disp


@_njit
def _project_ball_nb(x, center, radius):
    m_count, d = x.shape
    proj = np.empty((m_count, d))
    disp = np.zeros(m_count)
    for m in range(m_count):
        acc = 0.0
        for k in range(d):
            o = x[m, k] - center[k]
            acc += o * o
        r = np.sqrt(acc)
        if r > radius:
            s = radius / r
            for k in range(d):
                proj[m, k] = center[k] + (x[m, k] - center[k]) * s
            disp[m] = r - radius
        else:
            for k in range(d):
                proj[m, k] = x[m, k]
    return proj, disp


# --------------------------------------------------------------------------
# obstacle step of the backward recursion


def obstacle_step_numpy(yhat, s, ndt, reflect):
    """Constrain a continuation value against the obstacle.

    ``reflect=True``: y = max(yhat, s) and dk = (s - yhat)^+.
    Otherwise the implicit penalty y = yhat + ndt (s - y)^+ solved in closed form,
    with dk = ndt (s - y)^+ taken from the solved y.
    """
    if reflect:
        y = np.maximum(yhat, s)
        dk = np.maximum(s - yhat, 0.0)
        return y, dk
    y = np.where(yhat >= s, yhat, (yhat + ndt * s) / (1.0 + ndt))
    dk = ndt * np.maximum(s - y, 0.0)
    return y, dk


@_njit
def _obstacle_step_nb(yhat, s, ndt, reflect):
    n = yhat.shape[0]
    y = np.empty(n)
    dk = np.empty(n)
    for m in range(n):
        a = yhat[m]
        b = s[m]
        if reflect:
            if a >= b:
                y[m] = a
            else:
                y[m] = b
            dk[m] = max(b - a, 0.0)
        else:
            if a >= b:
                y[m] = a
            else:
                y[m] = (a + ndt * b) / (1.0 + ndt)
            dk[m] = ndt * max(b - y[m], 0.0)
    return y, dk


# --------------------------------------------------------------------------
# monomial regression features


def monomials_numpy(x, exponents):
    """Evaluate monomials ``prod_k x[:, k] ** exponents[j, k]`` -> [M, P]."""
    return np.prod(x[:, None, :] ** exponents[None, :, :], axis=2)


@_njit
def _monomials_nb(x, exponents):
    m_count, d = x.shape
    p = exponents.shape[0]
    out = np.ones((m_count, p))
    for m in range(m_count):
        for j in range(p):
            v = 1.0
            for k in range(d):
                e = exponents[j, k]
                for _ in range(e):
                    v *= x[m, k]
            out[m, j] = v
    return out


# --------------------------------------------------------------------------
# public dispatch

if USE_NUMBA:

    def thomas(lower, diag, upper, rhs):
        return _thomas_nb(np.ascontiguousarray(lower, dtype=np.float64),
                          np.ascontiguousarray(diag, dtype=np.float64),
                          np.ascontiguousarray(upper, dtype=np.float64),
                          np.ascontiguousarray(rhs, dtype=np.float64))

    def project_interval(x, lo, hi):
        return _project_interval_nb(np.ascontiguousarray(x, dtype=np.float64), float(lo), float(hi))

    def project_ball(x, center, radius):
        return _project_ball_nb(np.ascontiguousarray(x, dtype=np.float64),
                                np.ascontiguousarray(center, dtype=np.float64), float(radius))

    def obstacle_step(yhat, s, ndt, reflect):
        yhat = np.ascontiguousarray(yhat, dtype=np.float64)
        s = np.ascontiguousarray(np.broadcast_to(s, yhat.shape), dtype=np.float64)
        return _obstacle_step_nb(yhat.ravel(), s.ravel(), float(ndt), bool(reflect))

    def monomials(x, exponents):
        return _monomials_nb(np.ascontiguousarray(x, dtype=np.float64),
                             np.ascontiguousarray(exponents, dtype=np.int64))

else:
    thomas = thomas_numpy
    project_interval = project_interval_numpy
    project_ball = project_ball_numpy

    def obstacle_step(yhat, s, ndt, reflect):
        yhat = np.asarray(yhat, dtype=np.float64).ravel()
        s = np.broadcast_to(np.asarray(s, dtype=np.float64), yhat.shape)
        return obstacle_step_numpy(yhat, s, ndt, reflect)

    def monomials(x, exponents):
        return monomials_numpy(np.asarray(x, dtype=np.float64), np.asarray(exponents, dtype=np.int64))


def numba_kernels():
    """The compiled twins, or None when numba is not importable."""
    if numba is None:  # pragma: no cover
        return None
    return {
        "thomas": _thomas_nb,
        "project_interval": _project_interval_nb,
        "project_ball": _project_ball_nb,
        "obstacle_step": _obstacle_step_nb,
        "monomials": _monomials_nb,
    }
