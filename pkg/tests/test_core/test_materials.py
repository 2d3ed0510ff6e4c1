"""Tests for layer materials and the convexity budget."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from hylam.core.cohesive import LoadingProfile, make_quadratic_unloading
from hylam.core.errors import MaterialError
from hylam.core.materials import (
    DamageDissipation,
    ElasticModulus,
    LayerMaterial,
    check_regularity_condition,
    hardening_params,
)


def _law_with_lambda(lam):
    """Capped parabola with lambda = 2c = lam."""
    return make_quadratic_unloading(LoadingProfile.parabolic_capped(0.5 * lam, 1.0))


def _layers(a, b=0.5):
    layer = LayerMaterial(ElasticModulus.power(a, b), DamageDissipation.polynomial())
    return (layer, layer)


class TestElasticModulus:
    """Test modulus families and their derivatives."""

    def test_power_values(self):
        """Test E(0) = a and E(1) = a 2^(-b)."""
        modulus = ElasticModulus.power(96.0, 0.5)

        assert float(modulus.E(np.array(0.0))) == pytest.approx(96.0)
        assert float(modulus.E(np.array(1.0))) == pytest.approx(96.0 / math.sqrt(2.0))
        assert modulus.eps == pytest.approx(96.0 / math.sqrt(2.0))

    @pytest.mark.parametrize("a, b", [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.0)])
    def test_power_invalid_parameters(self, a, b):
        """Test that a <= 0 or b outside (0, 1) raise MaterialError."""
        with pytest.raises(MaterialError):
            ElasticModulus.power(a, b)

    def test_derivatives_match_finite_differences(self):
        """Test E' and E'' against central differences on interior probes."""
        modulus = ElasticModulus.power(10.0, 0.3)
        y = np.linspace(0.05, 0.95, 19)
        h = 1e-5

        fd1 = (modulus.E(y + h) - modulus.E(y - h)) / (2 * h)
        fd2 = (modulus.E_prime(y + h) - modulus.E_prime(y - h)) / (2 * h)

        np.testing.assert_allclose(modulus.E_prime(y), fd1, rtol=1e-6)
        np.testing.assert_allclose(modulus.E_second(y), fd2, rtol=1e-6)

    def test_tabulated_modulus(self):
        """Test a tabulated modulus interpolates its samples."""
        modulus = ElasticModulus.tabulated([0.0, 0.5, 1.0], [3.0, 2.0, 1.5])

        assert float(modulus.E(np.array(0.5))) == pytest.approx(2.0)
        assert modulus.family_tag == "custom"


class TestHardeningParams:
    """Test the hardening constants."""

    def test_closed_form_reference(self):
        """Test m = 144, M = 72 and m/M = 2 for a = 96, b = 1/2."""
        params = hardening_params(ElasticModulus.power(96.0, 0.5))

        assert params.m == pytest.approx(144.0, rel=1e-12)
        assert params.M == pytest.approx(72.0, rel=1e-12)
        assert params.m / params.M == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("a", [1.0, 24.0, 96.0, 480.0])
    def test_ratio_is_a_over_48(self, a):
        """Test m/M = a/48 for the b = 1/2 power family."""
        params = hardening_params(ElasticModulus.power(a, 0.5))

        assert params.m / params.M == pytest.approx(a / 48.0, abs=1e-10)

    @pytest.mark.parametrize("a, b", [(96.0, 0.5), (5.0, 0.2), (12.0, 0.8)])
    def test_grid_agrees_with_closed_form(self, a, b):
        """Test the grid estimate against the closed form at resolution 256."""
        modulus = ElasticModulus.power(a, b)
        exact = hardening_params(modulus, 256, closed_form=True)
        grid = hardening_params(modulus, 256, closed_form=False)

        assert grid.m == pytest.approx(exact.m, rel=1e-10)
        assert grid.M == pytest.approx(exact.M, rel=1e-10)
        assert grid.eps == pytest.approx(exact.eps, rel=1e-10)

    def test_constant_modulus_is_not_hardening(self):
        """Test that a constant modulus has m <= 0."""
        params = hardening_params(ElasticModulus.custom(lambda y: np.full_like(y, 5.0)))

        assert params.m <= 0.0

    def test_nonpositive_modulus_rejected(self):
        """Test that E <= 0 on [0, 1] raises MaterialError."""
        with pytest.raises(MaterialError):
            hardening_params(ElasticModulus.custom(lambda y: 1.0 - 2.0 * y))


class TestDamageDissipation:
    """Test dissipation families."""

    def test_polynomial_reference(self):
        """Test that the default polynomial is (y^2 + y) / 2 with mu = 1."""
        w = DamageDissipation.polynomial()

        assert float(w.w(np.array(1.0))) == pytest.approx(1.0)
        assert float(w.w_prime(np.array(0.0))) == pytest.approx(0.5)
        assert w.mu == 1.0
        assert w.check_convexity()

    def test_linear_has_zero_mu(self):
        """Test that a linear dissipation is convex with mu = 0."""
        w = DamageDissipation.linear(2.0)

        assert w.mu == 0.0
        assert w.check_convexity()

    def test_negative_coefficient_rejected(self):
        """Test that negative coefficients raise MaterialError."""
        with pytest.raises(MaterialError):
            DamageDissipation.polynomial(-1.0, 1.0)

    def test_custom_mu_estimate(self):
        """Test the second-difference estimate of mu."""
        w = DamageDissipation.custom(lambda y: y + 1.5 * y * y)

        assert w.mu == pytest.approx(3.0, rel=1e-6)

    def test_concave_dissipation_fails_convexity(self):
        """Test that an overstated mu is caught by the three-point test."""
        w = DamageDissipation.custom(lambda y: y, mu=1.0)

        assert not w.check_convexity()


class TestRegularityCondition:
    """Test the parameter condition m/M > lambda L^2 / pi^2."""

    def test_reference_margin_is_one(self):
        """Test a = 96, b = 1/2, lambda = 1, L = pi gives margin 1."""
        budget = check_regularity_condition(_layers(96.0), _law_with_lambda(1.0), math.pi)

        assert budget.margin == pytest.approx(1.0, abs=1e-12)
        assert budget.holds
        assert budget.poincare == pytest.approx(1.0)

    def test_weak_modulus_fails(self):
        """Test a = 24 gives margin -0.5."""
        budget = check_regularity_condition(_layers(24.0), _law_with_lambda(1.0), math.pi)

        assert budget.margin == pytest.approx(-0.5, abs=1e-12)
        assert not budget.holds

    def test_vanishing_lambda_always_holds(self):
        """Test that lambda = 0 leaves the margin at m/M."""
        law = make_quadratic_unloading(LoadingProfile.custom(
            lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z), lam=0.0, delta_bar=math.inf))
        budget = check_regularity_condition(_layers(96.0), law, math.pi)

        assert budget.margin == pytest.approx(2.0)
        assert budget.holds

    def test_improved_stability_constant(self):
        """Test c = min(margin, (mu ^ 1) / 2)."""
        budget = check_regularity_condition(_layers(96.0), _law_with_lambda(1.0), math.pi)

        assert budget.improved_stability == pytest.approx(0.5)

    def test_to_dict_round_trips_through_json(self):
        """Test the serialisable summary."""
        import json

        budget = check_regularity_condition(_layers(96.0), _law_with_lambda(1.0), math.pi)
        data = json.loads(json.dumps(budget.to_dict()))

        assert data["margin"] == pytest.approx(1.0)
        assert data["holds"] is True
        assert len(data["layers"]) == 2

    def test_constant_modulus_gives_finite_margin(self):
        """Test a modulus without curvature keeps the margin finite and JSON-safe."""
        import json

        flat = LayerMaterial(ElasticModulus.tabulated([0.0, 1.0], [2.0, 2.0]), DamageDissipation.polynomial())
        budget = check_regularity_condition((flat, flat), _law_with_lambda(1.0), math.pi)

        assert math.isfinite(budget.m_over_M)
        assert math.isfinite(budget.margin)
        assert budget.margin == pytest.approx(-1.0, abs=1e-9)
        assert not budget.holds
        json.dumps(budget.to_dict(), allow_nan=False)

    def test_softening_layer_contributes_nonpositive_ratio(self):
        """Test a linear modulus with M = 0 and m < 0 is finite and picked as the minimum."""
        import json

        linear = LayerMaterial(ElasticModulus.tabulated([0.0, 1.0], [2.0, 1.0]), DamageDissipation.polynomial())
        stiff = _layers(96.0)[0]
        budget = check_regularity_condition((stiff, linear), _law_with_lambda(1.0), math.pi)

        assert math.isfinite(budget.margin)
        assert budget.m_over_M <= 0.0
        assert budget.margin <= -1.0
        json.dumps(budget.to_dict(), allow_nan=False)
