#!/usr/bin/env python3
"""
Acceptance Tests
================
Shipped configs and `verify` on every built-in model, with the exit codes
documented in the config headers, and the numerical guarantees of the flows,
curvature routes and criteria at full scale. Slow: run with `pytest -m slow`.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from src.criteria import check_dot_kappa, check_htype, j_length_profiles, sample_probes
from src.flows import (
    energy_drift,
    integrate_base_geodesics,
    integrate_extended_geodesics,
    integrate_normal_geodesics,
    project_trajectory,
)
from src.frenet import frenet_curvatures, kappa_via_extremal
from src.geometry_core import PhaseState, extremal_covector_from_coefficients, random_unit_coefficients
from src.metric_extension import (
    ExtendedCometric,
    check_nondegenerate,
    check_step2_decomposition,
    compare_projections,
)
from src.models import MODEL_NAMES, get_model, step2_carnot
from src.stencils import first_derivative
from srgeodesics import EXIT_CHECK_FAILED, EXIT_OK, main

# =============================================================================
# Test Configuration
# =============================================================================

PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"

pytestmark = pytest.mark.slow

CONSTANT_STRUCTURE_MODELS = ["heisenberg", "hopf", "quaternionic-htype", "product-heisenberg"]


# =============================================================================
# Helper Functions
# =============================================================================

def random_geodesics(model, rng, count, T, h=1e-3):
    """Unit-speed normal geodesics from random points, annihilators and directions."""
    x0 = model.random_points(rng, count)
    b = rng.normal(size=(count, model.vertical_dim))
    a = random_unit_coefficients(rng, count, model.n)
    lam0 = extremal_covector_from_coefficients(model, x0, b, a)
    return integrate_normal_geodesics(model, x0, lam0, T, h)


def frenet_profiles(model, trajectories):
    return [frenet_curvatures(model, project_trajectory(model, traj)) for traj in trajectories]


# =============================================================================
# Tests
# =============================================================================

class TestShippedConfigs:
    """config/*.yaml end to end"""

    @pytest.mark.parametrize(
        "name,expected",
        [
            ("heisenberg_demo", EXIT_OK),
            ("hopf_parallel_circles", EXIT_OK),
            ("product_heisenberg_htype", EXIT_CHECK_FAILED),
            ("twisted_counterexample", EXIT_CHECK_FAILED),
            ("degenerate_step2", EXIT_CHECK_FAILED),
        ],
    )
    def test_exit_codes(self, tmp_path, name, expected):
        assert main(["--no-progress", "--out", str(tmp_path), "run", str(CONFIG_DIR / f"{name}.yaml")]) == expected

    def test_product_failures_are_the_expected_ones(self, tmp_path):
        main(["--no-progress", "--out", str(tmp_path), "run", str(CONFIG_DIR / "product_heisenberg_htype.yaml")])
        with open(tmp_path / "product_heisenberg_htype" / "report.json") as f:
            report = json.load(f)
        status = {check["name"]: check["pass"] for check in report["checks"]}
        assert status == {
            "htype": False,
            "j2": False,
            "kappa1-constant": True,
            "kappa2-vanishing": False,
            "theorem1": True,
        }

    def test_degenerate_report_names_missing_direction(self, tmp_path):
        main(["--no-progress", "--out", str(tmp_path), "run", str(CONFIG_DIR / "degenerate_step2.yaml")])
        with open(tmp_path / "degenerate_step2" / "report.json") as f:
            report = json.load(f)
        witness = report["checks"][0]["witnesses"][0]
        assert witness["rank"] == 2
        assert len(witness["missingDirections"]) == 1


class TestVerifyModels:
    """verify <model> with reduced horizons"""

    @pytest.mark.parametrize(
        "model,expected",
        [
            ("heisenberg", EXIT_OK),
            ("hopf", EXIT_OK),
            ("quaternionic-htype", EXIT_OK),
            ("product-heisenberg", EXIT_CHECK_FAILED),
            ("twisted-heisenberg", EXIT_CHECK_FAILED),
        ],
    )
    def test_verify(self, tmp_path, model, expected):
        args = ["--no-progress", "--seed", "7", "--out", str(tmp_path), "verify", model, "--T", "1.0", "--ics", "5", "--probes", "10"]
        assert main(args) == expected


class TestHeisenbergCircles:
    """Projected Heisenberg geodesics are circles of curvature |c|"""

    def test_circle_law(self, rng):
        model = get_model("heisenberg")
        count = 100
        phi = rng.uniform(0.0, 2.0 * np.pi, count)
        c = rng.choice([-1.0, 1.0], count) * rng.uniform(0.05, 2.0, count)
        x0 = np.zeros((count, 3))
        a = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        lam0 = extremal_covector_from_coefficients(model, x0, c[:, None], a)
        profiles = frenet_profiles(model, integrate_normal_geodesics(model, x0, lam0, 5.0, 1e-3))
        for profile, ci in zip(profiles, c):
            assert profile.verdict.kappa1_rel_std < 1e-6
            assert np.max(np.abs(profile.kappa1 - abs(ci))) < 1e-6
            assert profile.kappa2_vanishing


class TestCurvatureRoutes:
    """Frenet and extremal curvatures over many initial conditions"""

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_routes_agree(self, rng, name):
        model = get_model(name)
        worst = 0.0
        for traj in random_geodesics(model, rng, 50, 2.0):
            frenet = frenet_curvatures(model, project_trajectory(model, traj))
            extremal = kappa_via_extremal(model, traj)
            worst = max(worst, float(np.max(np.abs(frenet.kappa1 - extremal.kappa1))))
        assert worst < 1e-6

    def test_quaternionic_projections_have_no_torsion(self, rng):
        model = get_model("quaternionic-htype")
        for profile in frenet_profiles(model, random_geodesics(model, rng, 50, 2.0)):
            assert profile.verdict.kappa2_max < 1e-5

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_doubling_the_sampling_rate(self, rng, name):
        model = get_model(name)
        x0 = model.random_points(rng, 10)
        b = rng.normal(size=(10, model.vertical_dim))
        lam0 = extremal_covector_from_coefficients(model, x0, b, random_unit_coefficients(rng, 10, model.n))
        coarse = frenet_profiles(model, integrate_normal_geodesics(model, x0, lam0, 2.0, 1e-3))
        fine = frenet_profiles(model, integrate_normal_geodesics(model, x0, lam0, 2.0, 5e-4))
        for c, f in zip(coarse, fine):
            assert np.max(np.abs(c.kappa1 - f.kappa1[::2])) < 1e-8

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_frenet_frame_is_orthogonal(self, rng, name):
        model = get_model(name)
        count = 10
        x0 = model.random_points(rng, count)
        # annihilator entries bounded away from zero keep kappa1 well above the floor
        b = rng.choice([-1.0, 1.0], (count, model.vertical_dim)) * rng.uniform(0.5, 2.0, (count, model.vertical_dim))
        lam0 = extremal_covector_from_coefficients(model, x0, b, random_unit_coefficients(rng, count, model.n))
        for profile in frenet_profiles(model, integrate_normal_geodesics(model, x0, lam0, 0.4, 1e-3)):
            e1, e2 = profile.frame[:, 0], profile.frame[:, 1]
            inner = np.einsum("ti,tij,tj->t", e1, model.base_metric(profile.base_points), e2)
            assert np.max(np.abs(inner[profile.kappa2_defined])) < 1e-8


class TestCriteriaAtScale:
    """Criteria against the curvature routes and their closed forms"""

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_theorem1_matches_kappa1_constant(self, rng, name):
        model = get_model(name)
        T, h = 2.0, 1e-3
        probes = sample_probes(model, rng, 50)
        _, jeta, _, _ = j_length_profiles(model, probes.points, probes.alphas, probes.vs, T, h)
        lengths = np.linalg.norm(jeta, axis=-1)
        theorem1 = np.max(np.abs(lengths - lengths[0]), axis=0) < 1e-5

        lam0 = extremal_covector_from_coefficients(model, probes.points, probes.alphas, probes.vs)
        profiles = frenet_profiles(model, integrate_normal_geodesics(model, probes.points, lam0, T, h))
        np.testing.assert_array_equal(theorem1, [p.kappa1_constant for p in profiles])

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_dot_kappa_is_derivative_of_j_length(self, rng, name):
        model = get_model(name)
        h = 1e-3
        probes = sample_probes(model, rng, 20)
        _, jeta, _, _ = j_length_profiles(model, probes.points, probes.alphas, probes.vs, 0.01, h)
        rate = np.abs(first_derivative(0.5 * np.sum(jeta * jeta, axis=-1), h)[0])
        expected = check_dot_kappa(model, probes.points, probes.alphas, probes.vs)
        np.testing.assert_allclose(rate, expected, atol=1e-5)

    def test_quaternionic_htype(self, rng):
        model = get_model("quaternionic-htype")
        probes = sample_probes(model, rng, 100)
        report = check_htype(model, probes.points, probes.alphas, probes.betas, tolerance=1e-10)
        assert report.passed
        assert report.details["maxSquareResidual"] < 1e-10
        assert report.details["maxPolarizationResidual"] < 1e-10


class TestExtendedMetricAtScale:
    """Extended cometric, step-2 decomposition and projection comparison"""

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_nondegenerate_everywhere(self, rng, name):
        model = get_model(name)
        assert check_nondegenerate(model, model.random_points(rng, 100)).passed

    @pytest.mark.parametrize("name", MODEL_NAMES)
    @pytest.mark.parametrize("normalization", [0.1, 1.0, 10.0])
    def test_normalization_keeps_verdict(self, rng, name, normalization):
        model = get_model(name)
        assert check_nondegenerate(model, model.random_points(rng, 20), normalization).passed

    @pytest.mark.parametrize("normalization", [0.1, 1.0, 10.0])
    def test_normalization_keeps_degenerate_verdict(self, normalization):
        model = step2_carnot(np.zeros((2, 2, 1)), 2, 3, name="zero", require_bracket_generating=False)
        assert not check_nondegenerate(model, np.zeros((1, 3)), normalization).passed

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_step2_decomposition(self, rng, name):
        model = get_model(name)
        assert check_step2_decomposition(model, model.random_points(rng, 20)).passed

    @pytest.mark.parametrize("name", ["heisenberg", "hopf"])
    def test_projections_coincide(self, rng, name):
        model = get_model(name)
        x0 = model.random_points(rng, 10)
        b = rng.normal(size=(10, model.vertical_dim))
        lam0 = extremal_covector_from_coefficients(model, x0, b, random_unit_coefficients(rng, 10, model.n))
        for x, lam in zip(x0, lam0):
            assert compare_projections(model, PhaseState(x, lam), 2.0, 1e-3) < 1e-4


class TestEnergyConservation:
    """Hamiltonian drift over T = 10 on every flow"""

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_normal_flow(self, rng, name):
        model = get_model(name)
        for traj in random_geodesics(model, rng, 10, 10.0):
            assert energy_drift(model, traj) < 1e-9

    @pytest.mark.parametrize("name", CONSTANT_STRUCTURE_MODELS)
    def test_extended_flow(self, rng, name):
        model = get_model(name)
        cometric = ExtendedCometric(model)
        x0 = model.random_points(rng, 10)
        b = rng.normal(size=(10, model.vertical_dim))
        lam0 = extremal_covector_from_coefficients(model, x0, b, random_unit_coefficients(rng, 10, model.n))
        for traj in integrate_extended_geodesics(model, cometric, x0, lam0, 10.0, 1e-3):
            assert energy_drift(model, traj, cometric) < 1e-9

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_base_geodesics(self, rng, name):
        model = get_model(name)
        starts = [project_trajectory(model, traj) for traj in random_geodesics(model, rng, 10, 0.01)]
        y0 = np.stack([s.points[0] for s in starts])
        v0 = np.stack([s.velocities[0] for s in starts])
        for traj in integrate_base_geodesics(model, y0, v0, 10.0, 1e-3):
            energy = 0.5 * np.einsum("ti,tij,tj->t", traj.velocities, model.base_metric(traj.points), traj.velocities)
            assert np.max(np.abs(energy - energy[0])) < 1e-9
