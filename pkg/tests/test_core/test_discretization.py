"""Tests for the mesh, the nodal state and energy assembly."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from hylam.core.discretization import (
    Mesh,
    SystemState,
    cohesive_energy,
    damage_energy,
    elastic_energy,
    field_energy,
    h1_norm_sq,
    sigma_integral,
    stiffness_integral,
    total_energy,
    total_gradient,
)
from hylam.core.errors import InvalidBound


def _random_state(rng, mesh):
    """Interior state with slips bounded away from zero and below delta_bar."""
    n = mesh.n_nodes
    u1 = rng.uniform(-0.3, 0.3, n)
    s = rng.uniform(0.05, 0.6, n) * rng.choice([-1.0, 1.0], n)
    u2 = u1 - s
    alpha1 = rng.uniform(0.1, 0.9, n)
    alpha2 = rng.uniform(0.1, 0.9, n)
    gamma_floor = np.where(rng.uniform(size=n) < 0.5, 0.0, np.abs(s) * rng.uniform(0.5, 1.5, n))
    return SystemState.from_fields(mesh, u1, u2, alpha1, alpha2), gamma_floor


class TestMesh:
    """Test the uniform mesh."""

    def test_geometry(self):
        """Test spacing, node count and trapezoid weights."""
        mesh = Mesh(2.0, 8)

        assert mesh.h == 0.25
        assert mesh.n_nodes == 9
        assert mesh.nodes[-1] == 2.0
        assert float(np.sum(mesh.weights)) == pytest.approx(2.0)

    @pytest.mark.parametrize("L, n", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
    def test_invalid_mesh(self, L, n):
        """Test that nonpositive lengths or element counts raise ValueError."""
        with pytest.raises(ValueError):
            Mesh(L, n)

    def test_affine_field(self, small_mesh):
        """Test the affine nodal field."""
        np.testing.assert_allclose(small_mesh.affine(0.4), 0.4 * small_mesh.nodes)


class TestSystemState:
    """Test state construction and invariant reporting."""

    def test_from_fields_starts_histories_at_slip(self, small_mesh):
        """Test delta_h = gamma = |u1 - u2| for a fresh state."""
        u1 = small_mesh.affine(0.2)
        state = SystemState.from_fields(small_mesh, u1, 0.5 * u1, small_mesh.constant(0), small_mesh.constant(0))

        np.testing.assert_allclose(state.delta_h, 0.5 * u1)
        np.testing.assert_allclose(state.gamma, 0.5 * u1)
        assert state.u_bar == pytest.approx(0.2)
        assert state.violations() == []

    def test_copy_is_independent(self, small_mesh):
        """Test that copies do not share arrays."""
        state = SystemState.zeros(small_mesh)
        clone = state.copy()
        clone.u1[3] = 1.0

        assert state.u1[3] == 0.0

    def test_violations_are_described(self, small_mesh):
        """Test boundary, box and history violations."""
        state = SystemState.zeros(small_mesh)
        state.u1[0] = 0.1
        state.alpha2[4] = 1.5
        state.gamma[2] = -1.0

        problems = state.violations(boundary_value=0.0)

        assert any("u1(0)" in p for p in problems)
        assert any("alpha2" in p for p in problems)
        assert any("gamma below delta_h" in p for p in problems)

    def test_boundary_value_checked(self, small_mesh):
        """Test that a wrong end value is reported."""
        state = SystemState.zeros(small_mesh)

        assert any("u1(L)" in p for p in state.violations(boundary_value=0.3))

    def test_wrong_shape_reported(self, small_mesh):
        """Test that mismatched array lengths are reported first."""
        state = SystemState.zeros(small_mesh)
        state.alpha1 = np.zeros(3)

        assert state.violations() == [f"alpha1 has shape (3,), expected ({small_mesh.n_nodes},)"]


class TestEnergies:
    """Test energy assembly on hand-computable states."""

    def test_homogeneous_affine_state(self, reference_layers, parabolic_law):
        """Test E = E(0) u_bar^2 / L per layer, no damage energy and no interface energy."""
        mesh = Mesh(1.0, 16)
        u = mesh.affine(0.1)
        zero = mesh.constant(0.0)
        state = SystemState.from_fields(mesh, u, u, zero, zero)

        assert elastic_energy(state, reference_layers) == pytest.approx(96.0 * 0.01, rel=1e-12)
        assert damage_energy(state, reference_layers) == 0.0
        assert cohesive_energy(state, parabolic_law) == 0.0
        assert total_energy(state, reference_layers, parabolic_law) == pytest.approx(0.96, rel=1e-12)
        assert sigma_integral(state, reference_layers) == pytest.approx(2 * 96.0 * 0.1, rel=1e-12)
        assert stiffness_integral(state, reference_layers) == pytest.approx(2 * 96.0, rel=1e-12)

    def test_uniform_damage_energy(self, reference_layers):
        """Test that a constant damage field pays only w(alpha) L per layer."""
        mesh = Mesh(2.0, 10)
        alpha = mesh.constant(0.5)
        zero = mesh.constant(0.0)
        state = SystemState.from_fields(mesh, zero, zero, alpha, alpha)

        expected = 2 * 2.0 * (10.0 * 0.5 + 0.5 * 0.25)
        assert damage_energy(state, reference_layers) == pytest.approx(expected, rel=1e-12)

    def test_uniform_slip_interface_energy(self, parabolic_law):
        """Test K = psi(s) L for a uniform slip on its loading branch."""
        mesh = Mesh(1.0, 4)
        zero = mesh.constant(0.0)
        state = SystemState.from_fields(mesh, mesh.constant(0.5), zero, zero, zero)

        assert cohesive_energy(state, parabolic_law) == pytest.approx(0.75, rel=1e-12)

    def test_history_below_slip_rejected(self, small_mesh, parabolic_law):
        """Test that gamma < slip raises InvalidBound."""
        state = SystemState.from_fields(small_mesh, small_mesh.constant(0.2), small_mesh.constant(0.0),
                                        small_mesh.constant(0.0), small_mesh.constant(0.0))
        state.gamma[4] = 0.1

        with pytest.raises(InvalidBound):
            cohesive_energy(state, parabolic_law)

    def test_h1_norm_of_affine_field(self):
        """Test the discrete H1 norm of x on [0, 1]."""
        mesh = Mesh(1.0, 64)

        assert h1_norm_sq(mesh, mesh.nodes) == pytest.approx(1.0 + 1.0 / 3.0, rel=1e-3)


class TestGradient:
    """Test the analytic gradient of the incremental energy."""

    def test_matches_finite_differences(self, reference_layers, parabolic_law):
        """Test every nodal gradient entry against central differences on random states."""
        mesh = Mesh(1.0, 16)
        rng = np.random.default_rng(11)
        step = 1e-6
        names = ("u1", "u2", "alpha1", "alpha2")

        for _ in range(50):
            state, gamma_floor = _random_state(rng, mesh)
            bundle = total_gradient(state, parabolic_law, reference_layers, gamma_floor)
            assert not bundle.nonsmooth.any()
            fields = [getattr(state, name) for name in names]

            for idx, name in enumerate(names):
                analytic = getattr(bundle, name)
                numeric = np.empty(mesh.n_nodes)
                for j in range(mesh.n_nodes):
                    plus = [f.copy() for f in fields]
                    minus = [f.copy() for f in fields]
                    plus[idx][j] += step
                    minus[idx][j] -= step
                    numeric[j] = (field_energy(mesh, reference_layers, parabolic_law, *plus, gamma_floor)
                                  - field_energy(mesh, reference_layers, parabolic_law, *minus, gamma_floor)) / (2 * step)
                scale = max(1.0, float(np.max(np.abs(analytic))))
                np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6 * scale, err_msg=name)

    def test_zero_slip_without_history_is_flagged(self, small_mesh, reference_layers, parabolic_law):
        """Test that nodes on the stick kink are flagged and carry the threshold."""
        zero = small_mesh.constant(0.0)
        state = SystemState.from_fields(small_mesh, zero, zero, zero, zero)

        bundle = total_gradient(state, parabolic_law, reference_layers, zero)

        assert bundle.nonsmooth.all()
        np.testing.assert_allclose(bundle.threshold, 2.0 * small_mesh.weights)
        np.testing.assert_allclose(bundle.u1, 0.0)

    def test_history_removes_the_kink(self, small_mesh, reference_layers, parabolic_law):
        """Test that a positive history leaves no nonsmooth node at zero slip."""
        zero = small_mesh.constant(0.0)
        state = SystemState.from_fields(small_mesh, zero, zero, zero, zero)

        bundle = total_gradient(state, parabolic_law, reference_layers, small_mesh.constant(0.3))

        assert not bundle.nonsmooth.any()
