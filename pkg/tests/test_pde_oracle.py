import math
import warnings

import numpy as np
import pytest

from rgbdsde.coefficients import NO_OBSTACLE, build_coefficients, ramp_obstacle
from rgbdsde.domain import Interval
from rgbdsde.errors import ConfigurationError, PreconditionError
from rgbdsde.field import evaluate_field
from rgbdsde.pde_oracle import PENALTY_TOL, FdMesh, compare_mc_fd, solve_obstacle_pde_1d
from rgbdsde.solver import SolverConfig

MESH = FdMesh(0.0, 1.0, 64, 100, 1.0)


def test_constants_are_preserved():
    c = build_coefficients("affine", {"l_0": 1.7, "sigma": 0.5})
    fd = solve_obstacle_pde_1d(c, None, MESH)
    np.testing.assert_allclose(fd.u, 1.7, atol=1e-12, rtol=0)


def test_homogeneous_obstacle_reduces_to_ode():
    c = build_coefficients("affine", {"sigma": 0.5})
    fd = solve_obstacle_pde_1d(c, ramp_obstacle(1.0, -0.5), MESH)
    expected = np.maximum(MESH.t - 0.5, 0.0)[:, None]
    assert np.max(np.abs(fd.u - expected)) <= 1e-4
    assert np.all(fd.residuals < 1e-8)


def test_self_convergence():
    c = build_coefficients("neumann_heat")
    pts = [(t, x) for t in (0.25, 0.5, 1.0) for x in (0.0, 0.25, 0.5, 0.75, 1.0)]
    vals = []
    for J, N in ((16, 8), (32, 32), (64, 128)):
        fd = solve_obstacle_pde_1d(c, None, FdMesh(0.0, 1.0, J, N, 1.0))
        vals.append(np.array([fd.at(t, x) for t, x in pts]))
    # dx -> dx/2, dt -> dt/4 divides the leading error by 4
    extrapolant = vals[2] + (vals[2] - vals[1]) / 3.0
    coarse = np.max(np.abs(vals[0] - extrapolant))
    medium = np.max(np.abs(vals[1] - extrapolant))
    assert coarse / medium >= 3.0


def test_initial_layer_and_feasibility():
    c = build_coefficients("neumann_heat")
    ob = ramp_obstacle(0.3, 1.0)
    fd = solve_obstacle_pde_1d(c, ob, MESH)
    np.testing.assert_allclose(fd.u[0], c.l(MESH.x[:, None]))
    h = np.array([ob.value(t, MESH.x[:, None], MESH.J + 1) for t in MESH.t])
    assert np.min(fd.u - h) >= -1e-8
    assert fd.penalty_iterations.max() > 0


def test_raising_l_never_lowers_u():
    lo = build_coefficients("neumann_heat")
    hi = build_coefficients("neumann_heat", {"l_1": 0.2})
    for ob in (None, ramp_obstacle(0.3, 1.0)):
        a = solve_obstacle_pde_1d(lo, ob, MESH)
        b = solve_obstacle_pde_1d(hi, ob, MESH)
        # on the contact set both sit on h only up to the penalty tolerance
        tol = 1e-12 if ob is None else PENALTY_TOL
        assert np.min(b.u - a.u) >= -tol


def test_symmetric_data_gives_symmetric_solution():
    c = build_coefficients("affine", {"sigma": 0.7, "l_0": 1.0, "l_2": 1.0})
    fd = solve_obstacle_pde_1d(c, None, MESH)
    assert np.max(np.abs(fd.u - fd.u[:, ::-1])) <= 1e-10


def test_guards():
    with pytest.raises(PreconditionError):
        solve_obstacle_pde_1d(build_coefficients("affine", {"g_y": 0.1, "sigma": 0.5}), None, MESH)
    with pytest.raises(PreconditionError):
        solve_obstacle_pde_1d(build_coefficients("affine"), None, MESH)
    with pytest.warns(UserWarning, match="Peclet"):
        solve_obstacle_pde_1d(build_coefficients("affine", {"b_0": 5.0, "sigma": 0.1}), None,
                              FdMesh(0.0, 1.0, 16, 10, 1.0))
    with pytest.raises(ConfigurationError):
        FdMesh(1.0, 0.0, 16, 10, 1.0)
    fd = solve_obstacle_pde_1d(build_coefficients("constant", {"sigma": 0.5}), None, MESH)
    with pytest.raises(ConfigurationError):
        fd.at(0.5, 2.0)


def test_constant_comparison():
    c = build_coefficients("constant", {"sigma": 0.5})
    fd = solve_obstacle_pde_1d(c, None, MESH)
    probes = [(0.5, np.array([0.5])), (1.0, np.array([0.25]))]
    table = evaluate_field(c, NO_OBSTACLE, Interval(0, 1), probes, SolverConfig(N=16, M_inner=256))
    rep = compare_mc_fd(table, fd)
    assert rep.max_abs <= 1e-8


def test_pinned_path_against_fd():
    # small sigma keeps the path nearly pinned; budget 2 dt (MC) + FD truncation (mesh halving)
    c = build_coefficients("pinned", {"sigma": 0.05})
    fd = solve_obstacle_pde_1d(c, None, FdMesh(0.0, 1.0, 256, 200, 1.0))
    fine = solve_obstacle_pde_1d(c, None, FdMesh(0.0, 1.0, 512, 800, 1.0))
    cfg = SolverConfig(N=64, M_inner=4096, degree=2)
    table = evaluate_field(c, NO_OBSTACLE, Interval(0, 1), [(1.0, np.array([0.25]))], cfg)
    rep = compare_mc_fd(table, fd)
    budget = 2 * cfg.grid.dt + abs(fd.at(1.0, 0.25) - fine.at(1.0, 0.25))
    assert rep.max_abs <= budget
    assert abs(fd.at(1.0, 0.25) - math.exp(-0.75)) <= budget


def test_unknown_probe_is_rejected():
    c = build_coefficients("constant", {"sigma": 0.5})
    fd = solve_obstacle_pde_1d(c, None, MESH)
    table = evaluate_field(c, NO_OBSTACLE, Interval(0, 1), [(0.5, np.array([0.5]))], SolverConfig(N=16, M_inner=256))
    with pytest.raises(ConfigurationError):
        compare_mc_fd(table, fd, [(0.25, np.array([0.5]))])
