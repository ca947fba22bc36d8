"""The numba kernels and their numpy twins must agree."""
import numpy as np
import pytest

from rgbdsde import _kernels
from rgbdsde.regression import monomial_exponents

nb = _kernels.numba_kernels()
pytestmark = pytest.mark.skipif(nb is None, reason="numba not installed")


def _rng():
    return np.random.default_rng(123)


def test_thomas_matches_dense_solve():
    rng = _rng()
    n = 40
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 3.0 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    dense = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    ref = np.linalg.solve(dense, rhs)
    np.testing.assert_allclose(_kernels.thomas_numpy(lower, diag, upper, rhs), ref, rtol=1e-12)
    np.testing.assert_allclose(nb["thomas"](lower, diag, upper, rhs), ref, rtol=1e-12)


def test_project_interval_twins():
    x = _rng().uniform(-2, 3, 500)
    a = _kernels.project_interval_numpy(x, 0.0, 1.0)
    b = nb["project_interval"](x, 0.0, 1.0)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


def test_project_ball_twins():
    x = _rng().normal(size=(500, 3)) * 2
    c = np.array([0.1, -0.2, 0.3])
    a = _kernels.project_ball_numpy(x, c, 1.5)
    b = nb["project_ball"](x, c, 1.5)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("reflect", [True, False])
def test_obstacle_step_twins(reflect):
    rng = _rng()
    yhat, s = rng.normal(size=300), rng.normal(size=300)
    a = _kernels.obstacle_step_numpy(yhat, s, 0.7, reflect)
    b = nb["obstacle_step"](yhat, s, 0.7, reflect)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-15, atol=0)


def test_obstacle_step_closed_form():
    y, k = _kernels.obstacle_step_numpy(np.array([0.0, 2.0]), np.array([1.0, 1.0]), 0.5, False)
    # y = (0 + 0.5 * 1) / 1.5, k = 0.5 * (1 - y)
    np.testing.assert_allclose(y, [1 / 3, 2.0])
    np.testing.assert_allclose(k, [1 / 3, 0.0])
    y, k = _kernels.obstacle_step_numpy(np.array([0.0, 2.0]), np.array([1.0, 1.0]), 0.0, True)
    np.testing.assert_array_equal(y, [1.0, 2.0])
    np.testing.assert_array_equal(k, [1.0, 0.0])


def test_monomials_twins():
    x = _rng().normal(size=(100, 2))
    e = monomial_exponents(2, 3)
    a = _kernels.monomials_numpy(x, e)
    b = nb["monomials"](x, e)
    np.testing.assert_allclose(a, b, rtol=1e-14)
    ref = np.stack([np.prod(x ** row, axis=1) for row in e], axis=1)
    np.testing.assert_allclose(a, ref, rtol=1e-14)


def test_backend_flag_is_reported():
    assert _kernels.BACKEND in ("numba", "numpy")
