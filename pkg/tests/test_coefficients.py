"""
Tests for coefficient fields, modulation, sampling and hypothesis checks
"""

import numpy as np
import pytest

from umblt.models.coefficients import (
    ConstantField,
    ModulationParams,
    OpticalCoefficients,
    SourceField,
    TensorDiffusion,
    check_hypotheses,
    coefficients_from_preset,
    experiment_coefficients,
    modulate,
    modulate_coefficients,
    rotated_tensor,
    sample_fields,
    tensor_eigenvalues,
)
from umblt.models.mesh import NodeField, build_grid
from umblt.models.phantom import SheppLogan
from umblt.utils.errors import CoefficientError


class _NodeValues:
    """sigma_a equal to 1 except at one point"""

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        return np.where(np.isclose(x, 0.0) & np.isclose(y, 0.0), -0.1, 1.0)


def test_experiment_one_values(exp1):
    c, s = exp1
    assert float(c.D(0.0, 0.0)) == pytest.approx(6.0)
    assert float(c.sigma_a(0.0, 0.0)) == pytest.approx(2.0)
    assert c.gamma == 1.0 and c.ell == 2.0


def test_experiment_two_values(exp2):
    c, _ = exp2
    assert float(c.D(0.0, 0.0)) == pytest.approx(3.0)
    assert float(c.sigma_a(0.0, 0.0)) == pytest.approx(2.0)
    assert float(c.sigma_a(1.0, 0.0)) == pytest.approx(1.0)


def test_unknown_experiment():
    with pytest.raises(CoefficientError):
        experiment_coefficients(3)


def test_defaults_from_settings():
    c, _ = experiment_coefficients(1)
    assert c.gamma == 1.0
    assert c.ell == 2.0


def test_ell_must_be_positive():
    with pytest.raises(CoefficientError):
        OpticalCoefficients(ConstantField(1.0), ConstantField(0.0), ell=0.0)


def test_modulation_at_zero_epsilon_is_identity(exp1):
    c, s = exp1
    x, y = np.array([0.1, -0.4]), np.array([0.3, 0.7])
    D, sigma, S = modulate(c, s, ModulationParams(0.0, (np.pi, np.pi), 0.3), x, y)
    np.testing.assert_array_equal(D, c.D(x, y))
    np.testing.assert_array_equal(sigma, c.sigma_a(x, y))
    np.testing.assert_array_equal(S, s(x, y))


def test_modulation_gamma_half_keeps_diffusion(exp1):
    c, s = exp1
    c = c.replace(gamma=0.5)
    x, y = np.array([0.2]), np.array([-0.3])
    D, _, _ = modulate(c, s, ModulationParams(0.2, (1.0, 2.0), 0.0), x, y)
    np.testing.assert_array_equal(D, c.D(x, y))


def test_modulation_value(exp1):
    c, s = exp1
    D, _, _ = modulate(c, s, ModulationParams(0.01, (np.pi, 0.0), 0.0), 0.0, 0.0)
    assert float(D) == pytest.approx(6.06)


def test_modulation_is_linear_in_epsilon(exp1):
    c, s = exp1
    x, y = np.linspace(-1, 1, 7), np.linspace(1, -1, 7)
    m = ModulationParams(0.0, (2.0, 1.0), 0.4)
    base = np.array(modulate(c, s, m, x, y))
    slopes = [(np.array(modulate(c, s, m.with_epsilon(e), x, y)) - base) / e for e in (1e-1, 1e-2)]
    np.testing.assert_allclose(slopes[0], slopes[1], rtol=1e-10, atol=1e-12)


def test_modulate_coefficients_matches_pointwise(exp1):
    c, s = exp1
    m = ModulationParams(0.05, (np.pi, np.pi), 0.0)
    c_eps, s_eps = modulate_coefficients(c, s, m)
    x, y = np.array([0.3, -0.2]), np.array([0.1, 0.5])
    D, sigma, S = modulate(c, s, m, x, y)
    np.testing.assert_allclose(c_eps.D(x, y), D)
    np.testing.assert_allclose(c_eps.sigma_a(x, y), sigma)
    np.testing.assert_allclose(s_eps(x, y), S)


def test_negative_epsilon_rejected():
    with pytest.raises(CoefficientError):
        ModulationParams(-0.1)


def test_sample_constant_diffusion(unit_grid, constant_coefficients, unit_source):
    fields = sample_fields(constant_coefficients, unit_source, unit_grid)
    assert np.all(fields.d_edges[0].x_edges == 1.0)
    assert np.all(fields.d_edges[0].y_edges == 1.0)


def test_diffusion_sampled_at_half_points(unit_grid):
    c = OpticalCoefficients(lambda x, y: np.asarray(x) + 0 * np.asarray(y), ConstantField(0.0))
    fields = sample_fields(c, None, unit_grid)
    for row in fields.d_edges[0].x_edges.T:
        np.testing.assert_allclose(row, [0.25, 0.75])


def test_phantom_background_is_zero():
    g = build_grid((-1, 1, -1, 1), 21, 21)
    phantom = SheppLogan()
    fields = sample_fields(
        OpticalCoefficients(ConstantField(1.0), ConstantField(1.0)), SourceField(phantom), g
    )
    S = fields.source.as_array()
    assert S[0, 0] == 0.0 and S[-1, -1] == 0.0
    assert S[10, 10] == pytest.approx(2.0 - 0.98)


def test_phantom_skull_is_mirror_symmetric():
    phantom = SheppLogan()
    X, Y = np.meshgrid(np.linspace(0, 1, 41), np.linspace(-1, 1, 41), indexing="ij")
    np.testing.assert_array_equal(phantom(X, Y) != 0, phantom(-X, Y) != 0)


def test_non_finite_sample_rejected(unit_grid):
    c = OpticalCoefficients(ConstantField(1.0), lambda x, y: np.full(np.shape(x), np.nan))
    with pytest.raises(CoefficientError):
        sample_fields(c, None, unit_grid)


def test_hypotheses_identity():
    g = build_grid((0, 1, 0, 1), 5, 5)
    c = OpticalCoefficients(ConstantField(1.0), ConstantField(0.0))
    report = check_hypotheses(c, g)
    assert report.passed
    assert report.lambda_estimate == pytest.approx(1.0)


def test_hypotheses_negative_absorption():
    g = build_grid((-1, 1, -1, 1), 5, 5)
    c = OpticalCoefficients(ConstantField(1.0), _NodeValues())
    report = check_hypotheses(c, g)
    assert not report.h4_passed
    assert report.min_sigma == pytest.approx(-0.1)
    assert report.h3_passed


def test_hypotheses_experiment_one(exp1):
    c, _ = exp1
    report = check_hypotheses(c, build_grid((-1, 1, -1, 1), 21, 21))
    assert report.h3_passed
    assert report.min_eigenvalue >= 2.0
    assert not report.h1_passed
    assert any(v.startswith("H1") for v in report.violations)


def test_rotated_tensor_eigenvalues():
    D = rotated_tensor(3.0, 0.5, 0.7)
    d11, d12, d22 = D(np.zeros(1), np.zeros(1))
    lo, hi = tensor_eigenvalues(d11, d12, d22)
    assert lo[0] == pytest.approx(0.5)
    assert hi[0] == pytest.approx(3.0)


def test_non_spd_tensor_fails_h3():
    g = build_grid((0, 1, 0, 1), 5, 5)
    D = TensorDiffusion(ConstantField(1.0), ConstantField(2.0), ConstantField(1.0))
    report = check_hypotheses(OpticalCoefficients(D, ConstantField(1.0)), g)
    assert not report.h3_passed


def test_presets():
    c, s = coefficients_from_preset("constant", D=2.0, sigma_a=0.5)
    assert float(c.D(0.3, 0.3)) == 2.0
    c, _ = coefficients_from_preset("anisotropic-rotated", a=2.0, b=1.0, theta=0.0)
    assert c.is_anisotropic
    with pytest.raises(CoefficientError):
        coefficients_from_preset("missing")
    with pytest.raises(CoefficientError):
        coefficients_from_preset("constant", bogus=1.0)


def test_sampled_tensor_matches_components():
    g = build_grid((0, 1, 0, 1), 5, 5)
    D = rotated_tensor(2.0, 1.0, np.pi / 6)
    fields = sample_fields(OpticalCoefficients(D, ConstantField(1.0)), None, g)
    assert fields.is_tensor
    d11, d12, d22 = (NodeField(g, n.values) for n in fields.d_nodes)
    assert d12.values[0] == pytest.approx((2.0 - 1.0) * np.cos(np.pi / 6) * np.sin(np.pi / 6))
    assert d11.values[0] + d22.values[0] == pytest.approx(3.0)
