#!/usr/bin/env python3
"""
Geometry Core Tests
===================
Brackets, coframes, structure tensors, annihilators and the J operator.
"""

import numpy as np
import pytest

from src.exceptions import InputError, NumericalError
from src.geometry_core import (
    AnnihilatorCovector,
    BracketMode,
    PhaseState,
    as_chart_array,
    bracket,
    coframe,
    curvature_r,
    extremal_covector,
    finite_difference_jacobians,
    hamiltonian_energy,
    horizontal_pairings,
    j_operator,
    sharp,
    structure_tensor,
)
from src.models import get_model


# =============================================================================
# Brackets and structure tensor
# =============================================================================

class TestBrackets:
    """Lie brackets of the frame fields"""

    @pytest.mark.parametrize("x", [[0.0, 0.0, 0.0], [0.4, -1.3, 2.0]])
    def test_heisenberg_bracket_is_vertical_unit(self, heisenberg_model, x):
        np.testing.assert_allclose(bracket(heisenberg_model, x, 0, 1), [0.0, 0.0, 1.0], atol=1e-14)

    def test_bracket_is_antisymmetric(self, quaternionic_model, rng):
        x = quaternionic_model.random_points(rng, 1)[0]
        np.testing.assert_allclose(
            bracket(quaternionic_model, x, 1, 3), -bracket(quaternionic_model, x, 3, 1), atol=1e-14
        )

    def test_bracket_index_out_of_range(self, heisenberg_model):
        with pytest.raises(InputError):
            bracket(heisenberg_model, [0.0, 0.0, 0.0], 0, 3)

    def test_heisenberg_structure_tensor(self, heisenberg_model, rng):
        C = structure_tensor(heisenberg_model, heisenberg_model.random_points(rng, 4))
        assert C.shape == (4, 2, 2, 1)
        np.testing.assert_allclose(C[:, 0, 1, 0], 1.0, atol=1e-14)
        np.testing.assert_allclose(C[:, 1, 0, 0], -1.0, atol=1e-14)

    def test_hopf_bracket_of_horizontal_fields(self, hopf_model, rng):
        C = structure_tensor(hopf_model, hopf_model.random_points(rng, 5))
        np.testing.assert_allclose(C[:, 0, 1, 0], 2.0, atol=1e-12)

    def test_twisted_curvature_depends_on_x(self, twisted_model):
        C = structure_tensor(twisted_model, np.array([0.3, 0.5, -1.0]))
        assert C[0, 1, 0] == pytest.approx(1.3, abs=1e-12)

    @pytest.mark.parametrize("name", ["quaternionic-htype", "hopf", "twisted-heisenberg"])
    def test_finite_difference_mode_matches_analytic(self, name, rng):
        analytic = get_model(name)
        numeric = get_model(name, bracket_mode=BracketMode.FINITE_DIFFERENCE)
        x = analytic.random_points(rng, 6)
        np.testing.assert_allclose(structure_tensor(numeric, x), structure_tensor(analytic, x), atol=1e-8)

    def test_finite_difference_step_underflow(self):
        with pytest.raises(NumericalError):
            finite_difference_jacobians(lambda x: x[..., None, :], np.ones(3), step=1e-20)

    def test_bracket_mode_from_string(self):
        assert BracketMode.from_string("Finite-Difference") == BracketMode.FINITE_DIFFERENCE
        with pytest.raises(ValueError, match="Valid modes"):
            BracketMode.from_string("symbolic")


# =============================================================================
# Coframe, annihilators, J operator
# =============================================================================

class TestCoframe:
    """Dual coframe and annihilator covectors"""

    def test_coframe_is_dual(self, any_model, rng):
        x = any_model.random_points(rng, 3)
        pairing = np.einsum("...ad,...bd->...ab", coframe(any_model, x), any_model.frame(x))
        np.testing.assert_allclose(pairing, np.broadcast_to(np.eye(any_model.m), pairing.shape), atol=1e-10)

    def test_heisenberg_vertical_coframe(self, heisenberg_model):
        x = np.array([0.4, 0.2, 0.0])
        theta_v = coframe(heisenberg_model, x)[2]
        np.testing.assert_allclose(theta_v, [0.1, -0.2, 1.0], atol=1e-14)
        alpha = AnnihilatorCovector.from_chart(heisenberg_model, x, theta_v)
        np.testing.assert_allclose(alpha.coefficients, [1.0])

    def test_non_annihilator_rejected(self, heisenberg_model):
        with pytest.raises(InputError, match="annihilate"):
            AnnihilatorCovector.from_chart(heisenberg_model, [0.4, 0.2, 0.0], [0.0, 0.0, 1.0])

    def test_annihilator_round_trip_through_chart(self, hopf_model, rng):
        x = hopf_model.random_points(rng, 1)[0]
        alpha = AnnihilatorCovector([0.7])
        recovered = AnnihilatorCovector.from_chart(hopf_model, x, alpha.to_chart(hopf_model, x))
        np.testing.assert_allclose(recovered.coefficients, [0.7], atol=1e-12)


class TestJOperator:
    """J_alpha matrices"""

    @pytest.mark.parametrize("c", [1.0, -2.5])
    def test_heisenberg_operator_matrix(self, heisenberg_model, c):
        J = j_operator(heisenberg_model, [0.3, 0.1, 0.0], AnnihilatorCovector([c]))
        np.testing.assert_allclose(J, [[0.0, -c], [c, 0.0]], atol=1e-14)

    def test_operator_is_skew(self, any_model, rng):
        x = any_model.random_points(rng, 1)[0]
        J = j_operator(any_model, x, AnnihilatorCovector(rng.normal(size=any_model.vertical_dim)))
        np.testing.assert_allclose(J, -J.T, atol=1e-10)

    def test_quaternionic_square_is_minus_norm(self, quaternionic_model, rng):
        b = rng.normal(size=3)
        J = j_operator(quaternionic_model, np.zeros(7), AnnihilatorCovector(b))
        np.testing.assert_allclose(J @ J, -np.dot(b, b) * np.eye(4), atol=1e-12)

    def test_zero_annihilator_gives_zero(self, product_model):
        J = j_operator(product_model, np.zeros(6), AnnihilatorCovector(np.zeros(product_model.vertical_dim)))
        assert not J.any()

    def test_curvature_of_horizontal_pair(self, heisenberg_model):
        r = curvature_r(heisenberg_model, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        np.testing.assert_allclose(r, [0.0, 0.0, 1.0], atol=1e-14)


# =============================================================================
# Phase states, sharp, energy
# =============================================================================

class TestPhaseData:
    """Sharp map, Hamiltonian and initial covectors"""

    def test_sharp_at_origin(self, heisenberg_model):
        np.testing.assert_allclose(sharp(heisenberg_model, [0, 0, 0], [1.0, 0.0, 1.0]), [1.0, 0.0, 0.0])

    def test_hamiltonian_energy(self, heisenberg_model):
        assert hamiltonian_energy(heisenberg_model, PhaseState([0, 0, 0], [1.0, 0.0, 1.0])) == pytest.approx(0.5)

    def test_extremal_covector_pairings(self, heisenberg_model, rng):
        x = heisenberg_model.random_points(rng, 1)[0]
        lam = extremal_covector(heisenberg_model, x, AnnihilatorCovector([2.0]), [0.6, 0.8])
        np.testing.assert_allclose(horizontal_pairings(heisenberg_model, x, lam), [0.6, 0.8], atol=1e-14)
        assert lam @ heisenberg_model.vertical_frame(x)[0] == pytest.approx(2.0)

    def test_phase_state_shape_mismatch(self):
        with pytest.raises(InputError):
            PhaseState([0.0, 0.0, 0.0], [1.0, 0.0])

    def test_non_finite_input_rejected(self):
        with pytest.raises(InputError, match="non-finite"):
            as_chart_array([0.0, np.nan, 1.0], 3, "point")
