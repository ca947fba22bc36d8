"""Bounded convex domains: membership, Euclidean projection, inward normal.

A domain is described by a level function ``psi`` positive inside, zero on the
boundary and negative outside.  Only intervals and balls are provided; both are
convex, so projection onto the closure is single-valued and its displacement
points along the inward normal at the projected point.
"""
import enum

import numpy as np

from . import _kernels
from .errors import ConfigurationError, PreconditionError

BOUNDARY_TOL = 1e-12


class Location(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Domain:
    kind = None
    dim = None

    def _point(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ConfigurationError(f"point of shape {x.shape} given for a {self.dim}-dimensional domain")
        return x

    def _rows(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self.dim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ConfigurationError(f"array of shape {x.shape} given for a {self.dim}-dimensional domain")
        return x

    def contains(self, x):
        v = self.psi(self._point(x))
        if abs(v) <= BOUNDARY_TOL:
            return Location.BOUNDARY
        return Location.INTERIOR if v > 0 else Location.OUTSIDE

    def in_closure(self, x):
        return self.contains(x) is not Location.OUTSIDE

    def project(self, x):
        """Closest point of the closure and the distance moved."""
        proj, disp = self.project_many(self._point(x)[None, :])
        return proj[0], float(disp[0])

    def inward_normal(self, x):
        x = self._point(x)
        if self.contains(x) is not Location.BOUNDARY:
            raise PreconditionError(f"{x} is not on the boundary")
        return self._normal(x)

    def sample(self, rng, count):
        """Uniform-ish points of the closure, used for assumption sampling."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


class Interval(Domain):
    kind = "interval"
    dim = 1

    def __init__(self, lo, hi):
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ConfigurationError(f"interval needs finite lo < hi, got ({lo}, {hi})")
        self.lo, self.hi = lo, hi

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi})"

    def psi(self, x):
        return float(min(x[0] - self.lo, self.hi - x[0]))

    def project_many(self, x):
        x = self._rows(x)
        proj, disp = _kernels.project_interval(x[:, 0], self.lo, self.hi)
        return proj[:, None], disp

    def _normal(self, x):
        mid = 0.5 * (self.lo + self.hi)
        return np.array([1.0 if x[0] < mid else -1.0])

    def sample(self, rng, count):
        return rng.uniform(self.lo, self.hi, size=(count, 1))

    @property
    def center(self):
        return np.array([0.5 * (self.lo + self.hi)])

    def to_dict(self):
        return {"kind": "interval", "lo": self.lo, "hi": self.hi}


class Ball(Domain):
    kind = "ball"

    def __init__(self, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.ndim != 1 or center.size == 0:
            raise ConfigurationError("ball center must be a nonempty vector")
        if not radius > 0:
            raise ConfigurationError(f"ball radius must be positive, got {radius}")
        self.center = center
        self.radius = float(radius)
        self.dim = center.size

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"

    def psi(self, x):
        return float(self.radius - np.linalg.norm(x - self.center))

    def project_many(self, x):
        return _kernels.project_ball(self._rows(x), self.center, self.radius)

    def _normal(self, x):
        v = self.center - x
        return v / np.linalg.norm(v)

    def sample(self, rng, count):
        direction = rng.standard_normal((count, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = self.radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / self.dim)
        return self.center + r * direction

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


def domain_from_dict(doc):
    """Build a domain from its config description (``None`` passes through)."""
    if doc is None:
        return None
    doc = dict(doc)
    kind = doc.pop("kind", None)
    required = {"interval": ("lo", "hi"), "ball": ("center", "radius")}
    if kind not in required:
        raise ConfigurationError(f"unknown domain kind {kind!r}")
    missing = [k for k in required[kind] if k not in doc]
    if missing:
        raise ConfigurationError(f"domain of kind {kind!r} is missing {missing}")
    extra = sorted(set(doc) - set(required[kind]))
    if extra:
        raise ConfigurationError(f"unknown domain keys: {extra}")
    cls = Interval if kind == "interval" else Ball
    return cls(*(doc[k] for k in required[kind]))
