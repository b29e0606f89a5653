#!/usr/bin/env python3
"""
Flow Tests
==========
Tests for the RK4 integrators:
- normal geodesics against the Heisenberg closed form, order of convergence
- divergence detection and time grids
- base geodesics, horizontal lifts and the two transports
- extended-metric geodesics
"""

import numpy as np
import pytest

from src.exceptions import DivergenceError, GeometryError, InputError
from src.flows import (
    Trajectory,
    black_triangle_transport,
    energy_drift,
    horizontal_lift,
    integrate_extended_geodesics,
    integrate_lifted_geodesics,
    integrate_normal_geodesic,
    integrate_normal_geodesics,
    parallel_transport_base,
    project_trajectory,
    riemann_geodesic_base,
    rk4_on_grid,
    time_grid,
)
from src.geometry_core import AnnihilatorCovector, PhaseState, horizontal_pairings
from src.metric_extension import ExtendedCometric
from src.models import step2_carnot


# =============================================================================
# Helper Functions
# =============================================================================

def heisenberg_closed_form(t, phi, c):
    """Base curve of the Heisenberg geodesic from the origin with lam = (cos phi, sin phi, c)."""
    x = (np.sin(phi + c * t) - np.sin(phi)) / c
    y = (np.cos(phi) - np.cos(phi + c * t)) / c
    return np.stack([x, y], axis=-1)


def heisenberg_state(phi, c):
    return PhaseState([0.0, 0.0, 0.0], [np.cos(phi), np.sin(phi), c])


def sampled_circle(radius: float, T: float, h: float) -> Trajectory:
    """Base circle (r sin t, r - r cos t) through the origin, with exact velocities."""
    t = time_grid(T, h)
    points = np.stack([radius * np.sin(t), radius - radius * np.cos(t)], axis=-1)
    velocities = np.stack([radius * np.cos(t), radius * np.sin(t)], axis=-1)
    return Trajectory(t, points, None, velocities, h, False, "base")


# =============================================================================
# Grids and the RK4 core
# =============================================================================

class TestRK4Core:
    """time_grid and rk4_on_grid"""

    def test_grid_covers_duration(self):
        grid = time_grid(1.0, 0.3)
        assert len(grid) == 5
        assert grid[-1] == pytest.approx(1.0)

    def test_zero_duration_is_single_sample(self):
        np.testing.assert_array_equal(time_grid(0.0, 0.1), [0.0])

    @pytest.mark.parametrize("h", [0.0, -1e-3, np.inf])
    def test_bad_step(self, h):
        with pytest.raises(InputError):
            time_grid(1.0, h)

    def test_exponential_growth(self):
        out = rk4_on_grid(lambda t, y: y, np.array([1.0]), time_grid(1.0, 0.01))
        assert out[-1, 0] == pytest.approx(np.e, rel=1e-9)

    def test_divergence_reports_last_good_time(self):
        with pytest.raises(DivergenceError) as excinfo:
            rk4_on_grid(lambda t, y: y * y, np.array([1.0]), time_grid(2.0, 0.01), "blow-up")
        assert 0.9 < excinfo.value.last_good_time < 1.1
        assert "last good time" in str(excinfo.value)


# =============================================================================
# Normal geodesics
# =============================================================================

class TestNormalGeodesics:
    """Hamiltonian flow of the sub-Riemannian energy"""

    @pytest.mark.parametrize("phi,c", [(0.0, 1.0), (0.7, -2.0), (2.1, 0.5)])
    def test_heisenberg_closed_form(self, heisenberg_model, phi, c):
        traj = integrate_normal_geodesic(heisenberg_model, heisenberg_state(phi, c), 2.0, 1e-3)
        expected = heisenberg_closed_form(traj.times, phi, c)
        np.testing.assert_allclose(traj.points[:, :2], expected, atol=1e-9)

    def test_fourth_order_convergence(self, heisenberg_model):
        errors = []
        for h in (0.1, 0.05):
            traj = integrate_normal_geodesic(heisenberg_model, heisenberg_state(0.3, 1.5), 2.0, h)
            errors.append(np.max(np.abs(traj.points[-1, :2] - heisenberg_closed_form(2.0, 0.3, 1.5))))
        assert 12.0 < errors[0] / errors[1] < 20.0

    def test_energy_is_conserved(self, hopf_model, rng):
        x0 = hopf_model.random_points(rng, 1)[0]
        lam0 = rng.normal(size=4)
        traj = integrate_normal_geodesic(hopf_model, PhaseState(x0, lam0), 2.0, 1e-3)
        assert energy_drift(hopf_model, traj) < 1e-9

    def test_hopf_geodesics_stay_on_sphere(self, hopf_model, rng):
        x0 = hopf_model.random_points(rng, 3)
        trajectories = integrate_normal_geodesics(hopf_model, x0, rng.normal(size=(3, 4)), 2.0, 1e-3)
        for traj in trajectories:
            np.testing.assert_allclose(np.linalg.norm(traj.points, axis=-1), 1.0, atol=1e-9)

    def test_normalization_gives_unit_speed(self, quaternionic_model, rng):
        x0 = quaternionic_model.random_points(rng, 1)[0]
        traj = integrate_normal_geodesic(quaternionic_model, PhaseState(x0, 3.0 * rng.normal(size=7)), 0.5, 1e-3)
        assert traj.normalized
        speeds = np.linalg.norm(horizontal_pairings(quaternionic_model, traj.points, traj.covectors), axis=-1)
        np.testing.assert_allclose(speeds, 1.0, atol=1e-9)

    def test_vertical_covector_is_stationary(self, heisenberg_model):
        traj = integrate_normal_geodesic(heisenberg_model, PhaseState([0.2, 0.1, 0.0], [0.05, -0.1, 1.0]), 1.0, 1e-2)
        assert not traj.normalized
        np.testing.assert_allclose(traj.points, np.broadcast_to(traj.points[0], traj.points.shape), atol=1e-14)

    def test_projection(self, heisenberg_model):
        traj = integrate_normal_geodesic(heisenberg_model, heisenberg_state(0.0, 1.0), 1.0, 1e-2)
        base = project_trajectory(heisenberg_model, traj)
        assert base.kind == "base"
        np.testing.assert_array_equal(base.points, traj.points[:, :2])
        np.testing.assert_allclose(np.linalg.norm(base.velocities, axis=-1), 1.0, atol=1e-9)

    def test_batch_shape_mismatch(self, heisenberg_model):
        with pytest.raises(InputError):
            integrate_normal_geodesics(heisenberg_model, np.zeros((2, 3)), np.ones((3, 3)), 1.0, 0.1)

    def test_base_trajectory_has_no_state(self):
        traj = Trajectory(np.array([0.0]), np.zeros((1, 2)), kind="base")
        with pytest.raises(InputError):
            traj.state(0)


# =============================================================================
# Base geodesics, lifts, transports
# =============================================================================

class TestBaseFlows:
    """Base geodesics, horizontal lifts, Levi-Civita and annihilator transport"""

    def test_lift_of_circle_sweeps_area(self, heisenberg_model):
        radius, T = 0.8, 2.0
        lift = horizontal_lift(heisenberg_model, sampled_circle(radius, T, 1e-3), [0.0, 0.0, 0.0])
        expected_z = 0.5 * radius**2 * (T - np.sin(T))
        assert lift.points[-1, 2] == pytest.approx(expected_z, abs=1e-8)
        np.testing.assert_allclose(lift.points[:, :2], sampled_circle(radius, T, 1e-3).points, atol=1e-8)

    def test_lift_requires_matching_start(self, heisenberg_model):
        with pytest.raises(InputError, match="away from the start"):
            horizontal_lift(heisenberg_model, sampled_circle(1.0, 1.0, 1e-2), [0.1, 0.0, 0.0])

    def test_great_circle_on_base_sphere(self, hopf_model):
        eta = riemann_geodesic_base(hopf_model, [0.5, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 1e-3)
        expected = 0.5 * np.stack([np.cos(2 * eta.times), np.sin(2 * eta.times), np.zeros_like(eta.times)], axis=-1)
        np.testing.assert_allclose(eta.points, expected, atol=1e-9)

    def test_zero_base_velocity(self, hopf_model):
        with pytest.raises(InputError):
            riemann_geodesic_base(hopf_model, [0.5, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0, 1e-2)

    def test_parallel_transport_along_great_circle(self, hopf_model):
        eta = riemann_geodesic_base(hopf_model, [0.5, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 1e-3)
        transported = parallel_transport_base(hopf_model, eta, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
        np.testing.assert_allclose(transported[:, 0], eta.velocities, atol=1e-8)
        np.testing.assert_allclose(transported[:, 1], np.broadcast_to([0.0, 0.0, 1.0], (len(eta), 3)), atol=1e-12)

    def test_annihilator_transport_in_carnot_group(self, heisenberg_model):
        traj = integrate_normal_geodesic(heisenberg_model, heisenberg_state(0.4, 1.0), 1.0, 1e-2)
        b = black_triangle_transport(heisenberg_model, traj, AnnihilatorCovector([2.5]))
        np.testing.assert_allclose(b, 2.5, atol=1e-12)

    def test_annihilator_transport_rejects_vertical_motion(self, heisenberg_model):
        t = time_grid(1.0, 0.1)
        points = np.stack([np.zeros_like(t), np.zeros_like(t), t], axis=-1)
        curve = Trajectory(t, points, None, np.tile([0.0, 0.0, 1.0], (len(t), 1)), 0.1, False, "lift")
        with pytest.raises(InputError, match="not horizontal"):
            black_triangle_transport(heisenberg_model, curve, AnnihilatorCovector([1.0]))

    def test_lifted_system_matches_separate_flows(self, hopf_model, rng):
        x0 = hopf_model.random_points(rng, 1)
        lifted = integrate_lifted_geodesics(hopf_model, x0, np.array([[0.6, 0.8]]), 1.0, 1e-3)
        np.testing.assert_allclose(np.linalg.norm(lifted.lift_points[:, 0], axis=-1), 1.0, atol=1e-9)
        np.testing.assert_allclose(hopf_model.projection(lifted.lift_points[:, 0]), lifted.base_points[:, 0], atol=1e-8)


# =============================================================================
# Extended-metric geodesics
# =============================================================================

class TestExtendedGeodesics:
    """Riemannian geodesics of the extended cometric"""

    def test_vertical_geodesic_stays_on_fiber(self, heisenberg_model):
        cometric = ExtendedCometric(heisenberg_model)
        traj = integrate_extended_geodesics(heisenberg_model, cometric, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 1e-2)[0]
        np.testing.assert_allclose(traj.points[:, :2], 0.0, atol=1e-14)
        np.testing.assert_allclose(traj.points[:, 2], traj.times, atol=1e-12)
        assert energy_drift(heisenberg_model, traj, cometric) < 1e-14

    def test_degenerate_cometric(self):
        model = step2_carnot(np.zeros((2, 2, 1)), 2, 3, require_bracket_generating=False)
        with pytest.raises(GeometryError, match="degenerate"):
            integrate_extended_geodesics(model, ExtendedCometric(model), [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0, 0.1)
