import math

import numpy as np
import pytest

from rgbdsde.coefficients import NO_OBSTACLE, build_coefficients, ramp_obstacle
from rgbdsde.domain import Interval
from rgbdsde.errors import ConfigurationError
from rgbdsde.field import evaluate_field, field_continuity_report
from rgbdsde.properties import jackknife_se
from rgbdsde.solver import SolverConfig

UNIT = Interval(0.0, 1.0)


def P(t, x):
    return (t, np.array([x]))


def test_constant_field():
    c = build_coefficients("affine", {"l_0": 2.5, "sigma": 0.5})
    cfg = SolverConfig(N=16, M_inner=256, degree=2)
    table = evaluate_field(c, NO_OBSTACLE, UNIT, [P(0.0, 0.3), P(0.5, 0.1), P(1.0, 1.0)], cfg)
    np.testing.assert_allclose(table.values, 2.5, atol=1e-10)


def test_pinned_probe():
    c = build_coefficients("pinned")
    cfg = SolverConfig(N=64, M_inner=16, degree=2)
    table = evaluate_field(c, NO_OBSTACLE, UNIT, [P(1.0, 0.25)], cfg)
    assert abs(table.mean[0] - math.exp(-0.75)) <= 2 * cfg.grid.dt


def test_probes_share_noise_and_are_reproducible():
    c = build_coefficients("neumann_heat")
    cfg = SolverConfig(N=16, M_inner=512, degree=2, seed=4)
    probes = [P(0.25, 0.5), P(0.5, 0.5)]
    a = evaluate_field(c, ramp_obstacle(1.0, -0.5), UNIT, probes, cfg)
    b = evaluate_field(c, ramp_obstacle(1.0, -0.5), UNIT, probes[::-1], cfg, threads=2)
    assert a.values[:, 0].tobytes() == b.values[:, 1].tobytes()
    assert a.meta["config_hash"] == b.meta["config_hash"]


def test_probe_validation():
    c = build_coefficients("neumann_heat")
    cfg = SolverConfig(N=16, M_inner=256, degree=2)
    with pytest.raises(ConfigurationError):
        evaluate_field(c, NO_OBSTACLE, UNIT, [P(0.3, 0.5)], cfg)
    with pytest.raises(ConfigurationError):
        evaluate_field(c, NO_OBSTACLE, UNIT, [P(0.5, 1.5)], cfg)
    with pytest.raises(ConfigurationError):
        evaluate_field(c, NO_OBSTACLE, UNIT, [P(2.0, 0.5)], cfg)


def test_identical_probes_have_zero_difference():
    c = build_coefficients("neumann_heat")
    cfg = SolverConfig(N=16, M_inner=256, degree=2)
    r = field_continuity_report(c, UNIT, [(P(0.5, 0.4), P(0.5, 0.4))], cfg)
    assert r.differences[0, 0] == 0.0 and r.modulus[0] == 0.0


def test_deterministic_field_differences():
    # sigma = b = phi = 0: u(t, x) = l(x) + f_0 t with l(x) = 2x, f_0 = 1
    c = build_coefficients("affine", {"f_0": 1.0, "l_1": 2.0})
    cfg = SolverConfig(N=16, M_inner=4, degree=2)
    pairs = [(P(0.5, 0.2), P(0.25, 0.7)), (P(1.0, 0.9), P(0.0, 0.1))]
    r = field_continuity_report(c, UNIT, pairs, cfg)
    expected = [abs((0.5 + 0.4) - (0.25 + 1.4)), abs((1.0 + 1.8) - 0.2)]
    np.testing.assert_allclose(r.differences[0], expected, atol=1e-8)


def test_modulus_does_not_grow_when_pairs_shrink():
    c = build_coefficients("neumann_heat")
    mods = []
    for seed in range(8):
        cfg = SolverConfig(N=32, M_inner=1024, degree=2, seed=seed)
        pairs = [(P(0.5, 0.3 - h / 2), P(0.5, 0.3 + h / 2)) for h in (0.2, 0.1, 0.05)]
        mods.append(field_continuity_report(c, UNIT, pairs, cfg).modulus)
    mods = np.array(mods)
    for a, b in ((0, 1), (1, 2)):
        d = mods[:, b] - mods[:, a]
        assert d.mean() <= 3 * jackknife_se(d)
    assert mods.max() < 1.0  # the data l has slope at most 1/2 and the flow is non-expansive
