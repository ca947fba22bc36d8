"""Monte Carlo solvers for reflected generalized backward doubly SDEs.

The package covers noise generation, reflected diffusions in simple domains,
a regression-based backward scheme (penalized, reflected and Picard), the
random field u(t, x) = Y_t^{t,x}, a 1D finite-difference oracle for g = 0,
property checks and a small experiment CLI.
"""
__version__ = "0.1.0"

from .coefficients import (
    NO_OBSTACLE, CoefficientSet, Constants, ObstacleSpec, build_coefficients, build_obstacle,
    validate_assumptions,
)
from .domain import Ball, Interval, Location
from .errors import (
    AssumptionError, ConfigurationError, ConvergenceError, NumericError, PreconditionError, RgbdsdeError,
)
from .solver import BdsdeSolution, SolverConfig, picard_solve, solve_penalized, solve_reflected
from .timegrid import make_grid, sample_paths

__all__ = [
    "NO_OBSTACLE", "CoefficientSet", "Constants", "ObstacleSpec", "build_coefficients", "build_obstacle",
    "validate_assumptions", "Ball", "Interval", "Location", "AssumptionError", "ConfigurationError",
    "ConvergenceError", "NumericError", "PreconditionError", "RgbdsdeError", "BdsdeSolution", "SolverConfig",
    "picard_solve", "solve_penalized", "solve_reflected", "make_grid", "sample_paths",
]
