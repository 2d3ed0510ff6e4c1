"""Tests for edge case scenarios and option combinations."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from hylam.core.cohesive import LoadingProfile, make_quadratic_unloading, make_separable
from hylam.core.discretization import Mesh
from hylam.core.engine import Problem, run_evolution
from hylam.core.loading import LoadProgram, TimePartition
from hylam.core.materials import DamageDissipation, ElasticModulus, LayerMaterial


def _quiet(msg):
    pass


def _mismatched_layers():
    stiff = LayerMaterial(ElasticModulus.power(96.0, 0.5), DamageDissipation.polynomial(10.0, 1.0))
    soft = LayerMaterial(ElasticModulus.power(48.0, 0.5), DamageDissipation.polynomial(10.0, 1.0))
    return (stiff, soft)


class TestLoadPrograms:
    """Test unusual boundary loads."""

    def test_zero_load(self, reference_layers, parabolic_law):
        """Test that a load held at zero leaves the bar untouched."""
        problem = Problem(Mesh(1.0, 8), reference_layers, parabolic_law, LoadProgram.tabulated([[0.0, 0.0], [1.0, 0.0]]),
                          TimePartition.uniform(1.0, 4), snapshot_all=True)

        trace = run_evolution(problem, log_callback=_quiet)

        assert trace.final.W == 0.0
        assert trace.final.E == 0.0
        for state in trace.snapshots.values():
            np.testing.assert_array_equal(state.u1, 0.0)
            np.testing.assert_array_equal(state.alpha1, 0.0)

    def test_single_step(self, reference_layers, parabolic_law):
        """Test a partition with one increment."""
        problem = Problem(Mesh(1.0, 8), reference_layers, parabolic_law, LoadProgram.linear_ramp(0.1),
                          TimePartition.uniform(1.0, 1))

        trace = run_evolution(problem, log_callback=_quiet)

        assert trace.n_steps == 1
        assert trace.final.W == pytest.approx(0.96, rel=1e-9)

    def test_triangle_needs_ordered_times(self):
        """Test that the peak must come before the end."""
        with pytest.raises(ValueError):
            LoadProgram.triangle(1.0, 0.1, 1.0)

    def test_unloading_keeps_history(self, parabolic_law):
        """Test that damage and the slip history never decrease while unloading."""
        problem = Problem(Mesh(1.0, 8), _mismatched_layers(), parabolic_law, LoadProgram.triangle(0.5, 0.2, 1.0),
                          TimePartition.uniform(1.0, 6), snapshot_all=True)

        trace = run_evolution(problem, log_callback=_quiet)

        steps = sorted(trace.snapshots)
        for before, after in zip(steps, steps[1:]):
            previous, current = trace.snapshots[before], trace.snapshots[after]
            assert np.all(current.delta_h >= previous.delta_h)
            assert np.all(current.alpha1 >= previous.alpha1)
            assert np.all(current.alpha2 >= previous.alpha2)


class TestCohesiveVariants:
    """Test runs with laws other than the capped parabola."""

    def test_exponential_law_is_unbounded(self, reference_layers):
        """Test that the exponential profile never reaches its cap."""
        law = make_quadratic_unloading(LoadingProfile.exponential(1.0, 1.0))
        problem = Problem(Mesh(1.0, 8), reference_layers, law, LoadProgram.linear_ramp(0.1),
                          TimePartition.uniform(1.0, 4))

        trace = run_evolution(problem, log_callback=_quiet)

        assert math.isinf(trace.delta_bar)
        assert trace.all_converged
        assert trace.final.W == pytest.approx(0.96, rel=1e-9)

    def test_separable_law_run(self, reference_layers):
        """Test an evolution under a separable law."""
        law = make_separable(lambda y: 0.5 * y**2, lambda z: z)
        problem = Problem(Mesh(1.0, 8), reference_layers, law, LoadProgram.linear_ramp(0.1),
                          TimePartition.uniform(1.0, 4))

        trace = run_evolution(problem, log_callback=_quiet)

        assert trace.all_converged
        assert trace.final.K == pytest.approx(0.0, abs=1e-12)


class TestDegenerateStates:
    """Test extreme meshes and initial data."""

    def test_fully_damaged_start(self, reference_layers, parabolic_law):
        """Test that damage already at one stays at one."""
        mesh = Mesh(1.0, 4)
        ones = mesh.constant(1.0)
        problem = Problem(mesh, reference_layers, parabolic_law, LoadProgram.linear_ramp(0.1),
                          TimePartition.uniform(1.0, 3), initial_alpha=(ones, ones.copy()), snapshot_all=True)

        trace = run_evolution(problem, log_callback=_quiet)

        for state in trace.snapshots.values():
            np.testing.assert_array_equal(state.alpha1, 1.0)
            np.testing.assert_array_equal(state.alpha2, 1.0)

    def test_single_element(self, reference_layers, parabolic_law):
        """Test that one element has no free displacement and stays affine."""
        mesh = Mesh(1.0, 1)
        problem = Problem(mesh, reference_layers, parabolic_law, LoadProgram.linear_ramp(0.1),
                          TimePartition.uniform(1.0, 2), snapshot_all=True)

        trace = run_evolution(problem, log_callback=_quiet)

        assert trace.all_converged
        np.testing.assert_allclose(trace.snapshots[2].u1, [0.0, 0.1])
        assert trace.max_eb_residual <= 1e-10
