"""Experiment configuration: JSON in, validated :class:`ExperimentSpec` out.

Unknown keys are rejected at every level, defaults are filled in and echoed
back through :meth:`ExperimentSpec.to_dict`, and :attr:`ExperimentSpec.digest`
hashes the canonical form so key order never matters.
"""
import copy
import hashlib
import json
from dataclasses import dataclass

from .coefficients import FAMILIES, OBSTACLES, build_coefficients, build_obstacle
from .domain import domain_from_dict
from .errors import ConfigurationError
from .solver import SolverConfig
from .timegrid import resolve_seed

SOLVER_DEFAULTS = {
    "T": 1.0, "N": 64, "M_inner": 4096, "M_outer": 1, "degree": 2,
    "penalty_n": None, "picard_max": 20, "picard_tol": 1e-8, "check_assumptions": True,
}
FD_DEFAULTS = {"N_fd": 200, "J": 256}
PROPERTY_DEFAULTS = {
    "comparison": {"delta": 1.0, "seeds": None},
    "penalization_monotone": {"n_list": [1, 10, 100]},
    "convergence": {"n_list": [10, 100, 1000]},
    "energy_bound": {"n_list": [1, 10, 100, 1000], "mu": 1.0},
    "picard": {"max_ratio": 0.9},
    "ramp_closed_form": {"n": 10},
}
TOP_KEYS = {"seed", "problem", "coefficients", "obstacle", "domain", "start", "solver",
            "probes", "fd_mesh", "properties", "output"}


def _reject_unknown(doc, allowed, where):
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(map(repr, extra))}")


def _fill(doc, defaults, where):
    doc = dict(doc or {})
    _reject_unknown(doc, defaults, where)
    return {**copy.deepcopy(defaults), **doc}


@dataclass
class ExperimentSpec:
    seed: int
    problem: str
    coefficients: dict
    obstacle: dict
    domain: dict
    start: list
    solver: dict
    probes: list
    fd_mesh: dict
    properties: list
    output: str

    def to_dict(self):
        return {
            "seed": self.seed, "problem": self.problem, "coefficients": self.coefficients,
            "obstacle": self.obstacle, "domain": self.domain, "start": self.start,
            "solver": self.solver, "probes": self.probes, "fd_mesh": self.fd_mesh,
            "properties": self.properties, "output": self.output,
        }

    @property
    def digest(self):
        doc = self.to_dict()
        doc.pop("output")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    # resolved objects
    def build_coefficients(self):
        return build_coefficients(self.coefficients["family"], self.coefficients.get("params"))

    def build_obstacle(self):
        return build_obstacle(self.obstacle["kind"], self.obstacle.get("params"))

    def build_domain(self):
        return domain_from_dict(self.domain)

    def solver_config(self, **changes):
        kw = {k: v for k, v in self.solver.items()}
        kw.update(changes)
        return SolverConfig(seed=self.seed, **kw)


def spec_from_dict(doc, seed=None):
    """Validate a parsed configuration; an explicit ``seed`` beats the environment and the file."""
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a JSON object")
    _reject_unknown(doc, TOP_KEYS, "configuration")
    if seed is not None:
        if int(seed) != seed or not 0 <= seed < 2**64:
            raise ConfigurationError(f"seed must fit in 64 unsigned bits, got {seed}")
        seed = int(seed)
    else:
        seed = resolve_seed(doc.get("seed"))

    coeff = dict(doc.get("coefficients") or {})
    _reject_unknown(coeff, {"family", "params"}, "coefficients")
    if "family" not in coeff:
        raise ConfigurationError("coefficients.family is required")
    if coeff["family"] not in FAMILIES:
        raise ConfigurationError(f"unknown coefficient family {coeff['family']!r}")
    coeff = {"family": coeff["family"], "params": dict(coeff.get("params") or {})}

    obst = dict(doc.get("obstacle") or {"kind": "none"})
    _reject_unknown(obst, {"kind", "params"}, "obstacle")
    obst.setdefault("kind", "none")
    if obst["kind"] not in OBSTACLES:
        raise ConfigurationError(f"unknown obstacle kind {obst['kind']!r}")
    obst = {"kind": obst["kind"], "params": dict(obst.get("params") or {})}

    domain = doc.get("domain")
    dom = domain_from_dict(domain)  # validates
    problem = doc.get("problem", "field" if dom is not None else "abstract")
    if problem not in ("abstract", "field"):
        raise ConfigurationError(f"problem must be 'abstract' or 'field', got {problem!r}")
    if problem == "field" and dom is None:
        raise ConfigurationError("a field problem needs a domain")
    if problem == "abstract":
        domain = None

    solver = _fill(doc.get("solver"), SOLVER_DEFAULTS, "solver")
    fd_mesh = _fill(doc.get("fd_mesh"), FD_DEFAULTS, "fd_mesh")

    probes = []
    for p in doc.get("probes") or []:
        if not isinstance(p, (list, tuple)) or len(p) < 2:
            raise ConfigurationError(f"probe {p!r} must be [t, x1, ..., xd]")
        probes.append([float(v) for v in p])

    props = []
    for entry in doc.get("properties") or []:
        entry = {"name": entry} if isinstance(entry, str) else dict(entry)
        name = entry.pop("name", None)
        if name not in PROPERTY_DEFAULTS:
            raise ConfigurationError(f"unknown property check {name!r}")
        props.append({"name": name, **_fill(entry, PROPERTY_DEFAULTS[name], f"properties[{name}]")})

    start = doc.get("start")
    if start is not None:
        start = [float(v) for v in (start if isinstance(start, list) else [start])]

    spec = ExperimentSpec(seed, problem, coeff, obst, domain, start, solver, probes, fd_mesh, props,
                          str(doc.get("output") or "out"))
    # build everything once so configuration errors surface at load time
    spec.build_coefficients()
    spec.build_obstacle()
    spec.solver_config()
    return spec


def load_config(path, seed=None):
    """Read and validate a JSON experiment file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return loads_config(text, source=str(path), seed=seed)


def loads_config(text, source="<string>", seed=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return spec_from_dict(doc, seed)
