#!/usr/bin/env python3
"""
Geometry Core
=============
Pointwise primitives of a submersion pi: M -> N carrying an orthonormal
horizontal frame X_1..X_n and a vertical frame V_1..V_{m-n}: frame Jacobians,
Lie brackets, the dual coframe, the structure tensor of the horizontal
distribution, the sharp map, the Hamiltonian, the curvature R and the J
operator.

Every function is batched: points have shape (..., chart_dim) and results
carry the same leading axes. Frame arrays stack the horizontal fields first:
frame(x)[..., a, :] is X_{a+1} for a < n and V_{a-n+1} otherwise.

Coefficient conventions used across the package:
  a  horizontal coefficients (length n), in the orthonormal base basis
     e_i = dpi(X_i); a horizontal vector is sum_i a_i X_i.
  b  vertical coefficients of an annihilator covector (length m - n) in the
     coframe dual to the vertical frame; alpha = sum_k b_k theta_{n+k}.
  C  structure tensor, C[..., i, j, k] = theta_{n+k}([X_i, X_j]), so that
     R(X_i, X_j) = sum_k C[i, j, k] V_k.
  J  operator matrix acting on coefficient columns, J[j, i] = alpha R(X_i, X_j).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Union

import numpy as np

from src.exceptions import GeometryError, InputError, ModelConstructionError, NumericalError

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
ANNIHILATOR_TOL = 1e-12


class BracketMode(str, Enum):
    """How frame Jacobians (and therefore brackets) are obtained."""

    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite-difference"

    @classmethod
    def from_string(cls, value: str) -> "BracketMode":
        value_lower = value.lower().strip()
        for member in cls:
            if member.value == value_lower:
                return member
        raise ValueError(
            f"Invalid bracket mode: {value}. "
            f"Valid modes: {[m.value for m in cls]}"
        )


class SubmersionModel:
    """Chart realization of a submersion with horizontal and vertical frames.

    Subclasses implement `frame`, `projection` and `projection_jacobian`, and
    override the base-space hooks when N is not Euclidean. Points of M live in
    a single working chart of dimension `chart_dim`; points of N in a chart of
    dimension `base_chart_dim`. Instances are immutable after construction.

    Attributes:
        name: registry name
        n: dimension of N (rank of the horizontal distribution)
        m: dimension of M
        chart_dim: number of coordinates of a point of M
        base_chart_dim: number of coordinates of a point of N
        bracket_mode: analytic frame Jacobians or central differences
        constant_structure: structure tensor independent of the point
        base_sectional_curvature: sectional curvature of N when constant
    """

    def __init__(
        self,
        name: str,
        n: int,
        m: int,
        chart_dim: int,
        base_chart_dim: int,
        bracket_mode: Union[BracketMode, str] = BracketMode.ANALYTIC,
        constant_structure: bool = False,
        base_sectional_curvature: Optional[float] = None,
    ) -> None:
        if not m > n >= 2:
            raise ModelConstructionError(f"need m > n >= 2, got n={n}, m={m}")
        if isinstance(bracket_mode, str) and not isinstance(bracket_mode, BracketMode):
            bracket_mode = BracketMode.from_string(bracket_mode)
        self.name = name
        self.n = n
        self.m = m
        self.chart_dim = chart_dim
        self.base_chart_dim = base_chart_dim
        self.bracket_mode = bracket_mode
        self.constant_structure = constant_structure
        self.base_sectional_curvature = base_sectional_curvature

    @property
    def vertical_dim(self) -> int:
        return self.m - self.n

    # -- subclass interface -------------------------------------------------

    def frame(self, x: np.ndarray) -> np.ndarray:
        """Stacked frame (..., m, chart_dim): horizontal fields, then vertical."""
        raise NotImplementedError

    def analytic_frame_jacobians(self, x: np.ndarray) -> Optional[np.ndarray]:
        """J[..., a, c, d] = d F_a^c / d x^d, or None when not available."""
        return None

    def projection(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def projection_jacobian(self, x: np.ndarray) -> np.ndarray:
        """dpi at x, shape (..., base_chart_dim, chart_dim)."""
        raise NotImplementedError

    def base_christoffels(self, y: np.ndarray) -> np.ndarray:
        """Gamma[..., k, i, j] = Gamma^k_ij of the Levi-Civita connection of N."""
        y = np.asarray(y, dtype=float)
        d = self.base_chart_dim
        return np.zeros(y.shape[:-1] + (d, d, d))

    def base_metric(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.eye(self.base_chart_dim), y.shape[:-1] + (self.base_chart_dim,) * 2)

    def tangent_projector(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projector of the chart onto T_xM."""
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.chart_dim), x.shape[:-1] + (self.chart_dim,) * 2)

    def base_tangent_projector(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.eye(self.base_chart_dim), y.shape[:-1] + (self.base_chart_dim,) * 2)

    def validate_points(self, x: np.ndarray) -> np.ndarray:
        """Return x as a float array or raise when it leaves the working chart."""
        return as_chart_array(x, self.chart_dim, "point")

    def validate_base_points(self, y: np.ndarray) -> np.ndarray:
        return as_chart_array(y, self.base_chart_dim, "base point")

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    # -- derived ------------------------------------------------------------

    def horizontal_frame(self, x: np.ndarray) -> np.ndarray:
        return self.frame(x)[..., : self.n, :]

    def vertical_frame(self, x: np.ndarray) -> np.ndarray:
        return self.frame(x)[..., self.n :, :]

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "chart_dim": self.chart_dim,
            "base_chart_dim": self.base_chart_dim,
            "bracket_mode": self.bracket_mode.value,
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, n={self.n}, m={self.m})"


def as_chart_array(values: Any, dim: int, what: str = "vector") -> np.ndarray:
    """Convert to a float array with trailing dimension `dim`; reject non-finite entries."""
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"{what} is not numeric: {e}") from e
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise InputError(f"{what} must have trailing dimension {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what} has non-finite entries")
    return arr


@dataclass(frozen=True)
class PhaseState:
    """A point x of M paired with a covector lam at x (chart components)."""

    x: np.ndarray
    lam: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        if x.ndim != 1 or lam.shape != x.shape:
            raise InputError(f"x and lam must be vectors of equal length, got {x.shape} and {lam.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
            raise InputError("phase state has non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class AnnihilatorCovector:
    """Covector annihilating the horizontal distribution, by vertical coefficients."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        b = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if not np.all(np.isfinite(b)):
            raise InputError("annihilator coefficients must be finite")
        object.__setattr__(self, "coefficients", b)

    @classmethod
    def from_chart(cls, model: SubmersionModel, x: np.ndarray, alpha: np.ndarray) -> "AnnihilatorCovector":
        """Wrap a chart covector after checking that it kills every X_i(x)."""
        x = model.validate_points(x)
        alpha = as_chart_array(alpha, model.chart_dim, "covector")
        frame = model.frame(x)
        residual = np.max(np.abs(frame[..., : model.n, :] @ alpha))
        if residual >= ANNIHILATOR_TOL * max(1.0, float(np.max(np.abs(alpha)))):
            raise InputError(f"covector does not annihilate the horizontal distribution (residual {residual:.3e})")
        return cls(frame[..., model.n :, :] @ alpha)

    def to_chart(self, model: SubmersionModel, x: np.ndarray) -> np.ndarray:
        if self.coefficients.shape[-1] != model.vertical_dim:
            raise InputError(
                f"annihilator has {self.coefficients.shape[-1]} coefficients, model needs {model.vertical_dim}"
            )
        return np.einsum("...k,...kd->...d", self.coefficients, coframe(model, x)[..., model.n :, :])


AnnihilatorLike = Union[AnnihilatorCovector, np.ndarray]


# ---------------------------------------------------------------------------
# Frames, Jacobians, brackets, coframe
# ---------------------------------------------------------------------------

def finite_difference_jacobians(field_fn, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobians of a stacked field function.

    Returns J[..., a, c, d] = d F_a^c / d x^d.
    """
    x = np.asarray(x, dtype=float)
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    if not step > 0 or np.spacing(scale) > step * 1e-6:
        raise NumericalError(f"finite-difference step {step:g} underflows at coordinate scale {scale:g}")
    offsets = step * np.eye(x.shape[-1])
    plus = field_fn(x[..., None, :] + offsets)
    minus = field_fn(x[..., None, :] - offsets)
    return np.moveaxis((plus - minus) / (2.0 * step), -3, -1)


def frame_jacobians(model: SubmersionModel, x: np.ndarray, fd_step: float = FD_STEP) -> np.ndarray:
    """Frame Jacobians (..., m, chart_dim, chart_dim) in the model's bracket mode."""
    if model.bracket_mode == BracketMode.ANALYTIC:
        jac = model.analytic_frame_jacobians(x)
        if jac is not None:
            return np.broadcast_to(jac, np.shape(x)[:-1] + jac.shape[-3:])
    return finite_difference_jacobians(model.frame, x, fd_step)


def all_brackets(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """[F_a, F_b] for every pair of frame fields, shape (..., m, m, chart_dim)."""
    frame = model.frame(x)
    jac = frame_jacobians(model, x)
    # [A, B] = DB A - DA B
    return np.einsum("...bcd,...ad->...abc", jac, frame) - np.einsum("...acd,...bd->...abc", jac, frame)


def bracket(model: SubmersionModel, x: np.ndarray, field_a: int, field_b: int) -> np.ndarray:
    """Lie bracket of two frame fields at x (indices into the stacked frame)."""
    x = model.validate_points(x)
    for index in (field_a, field_b):
        if not 0 <= index < model.m:
            raise InputError(f"frame field index {index} out of range 0..{model.m - 1}")
    frame = model.frame(x)
    jac = frame_jacobians(model, x)
    return (
        np.einsum("...cd,...d->...c", jac[..., field_b, :, :], frame[..., field_a, :])
        - np.einsum("...cd,...d->...c", jac[..., field_a, :, :], frame[..., field_b, :])
    )


def coframe(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """Dual coframe theta_a (..., m, chart_dim) with theta_a(F_b) = delta_ab.

    The rows lie in the span of the frame, so they also annihilate the chart
    normal directions of embedded models.
    """
    frame = model.frame(x)
    if model.chart_dim == model.m:
        theta = np.swapaxes(np.linalg.inv(frame), -1, -2)
    else:
        theta = np.swapaxes(np.linalg.pinv(frame), -1, -2)
    if not np.all(np.isfinite(theta)):
        raise GeometryError(f"degenerate frame for model '{model.name}'")
    return theta


def structure_tensor(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """C[..., i, j, k] = theta_{n+k}([X_i, X_j])."""
    n = model.n
    brackets = all_brackets(model, x)[..., :n, :n, :]
    theta_v = coframe(model, x)[..., n:, :]
    return np.einsum("...ijd,...kd->...ijk", brackets, theta_v)


def vertical_action(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """T[..., i, l, k] = theta_{n+l}([X_i, V_k]), the coefficients driving annihilator transport."""
    n = model.n
    brackets = all_brackets(model, x)[..., :n, n:, :]
    theta_v = coframe(model, x)[..., n:, :]
    return np.einsum("...ikd,...ld->...ilk", brackets, theta_v)


# ---------------------------------------------------------------------------
# Coefficients, sharp, energy
# ---------------------------------------------------------------------------

def horizontal_pairings(model: SubmersionModel, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """u_i = lam(X_i(x))."""
    return np.einsum("...id,...d->...i", model.horizontal_frame(x), lam)


def horizontal_coefficients(model: SubmersionModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...id,...d->...i", coframe(model, x)[..., : model.n, :], v)


def vertical_coefficients(model: SubmersionModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...kd,...d->...k", coframe(model, x)[..., model.n :, :], v)


def sharp(model: SubmersionModel, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """sharp(lam) = sum_i lam(X_i) X_i, a horizontal chart vector."""
    x = model.validate_points(x)
    lam = as_chart_array(lam, model.chart_dim, "covector")
    xh = model.horizontal_frame(x)
    u = np.einsum("...id,...d->...i", xh, lam)
    return np.einsum("...i,...id->...d", u, xh)


def hamiltonian_energy_at(model: SubmersionModel, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
    u = horizontal_pairings(model, x, lam)
    return 0.5 * np.sum(u * u, axis=-1)


def hamiltonian_energy(model: SubmersionModel, state: PhaseState) -> float:
    """H = 1/2 sum_i lam(X_i(x))^2."""
    x = model.validate_points(state.x)
    lam = as_chart_array(state.lam, model.chart_dim, "covector")
    return float(hamiltonian_energy_at(model, x, lam))


def base_frame(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """e_i = dpi(X_i), shape (..., n, base_chart_dim)."""
    return np.einsum("...bc,...ic->...ib", model.projection_jacobian(x), model.horizontal_frame(x))


def base_coefficients(model: SubmersionModel, x: np.ndarray, vb: np.ndarray) -> np.ndarray:
    """Coefficients a_i = <vb, e_i>_{g_N} of a base vector at pi(x)."""
    e = base_frame(model, x)
    g = model.base_metric(model.projection(x))
    return np.einsum("...ib,...bc,...c->...i", e, g, vb)


def base_vector(model: SubmersionModel, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """sum_i a_i e_i as a base chart vector."""
    return np.einsum("...i,...ib->...b", a, base_frame(model, x))


def horizontal_vector(model: SubmersionModel, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...id->...d", a, model.horizontal_frame(x))


def horizontal_lift_vector(model: SubmersionModel, x: np.ndarray, vb: np.ndarray) -> np.ndarray:
    """h_x(vb): the horizontal vector at x projecting to vb."""
    return horizontal_vector(model, x, base_coefficients(model, x, vb))


# ---------------------------------------------------------------------------
# Curvature and the J operator
# ---------------------------------------------------------------------------

def curvature_r_coefficients(C: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vertical coefficients of R(sum a_i X_i, sum b_j X_j)."""
    return np.einsum("...i,...j,...ijk->...k", a, b, C)


def curvature_r(model: SubmersionModel, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """R(v, w) = pr_V [pr_D v, pr_D w] as a vertical chart vector."""
    x = model.validate_points(x)
    v = as_chart_array(v, model.chart_dim, "v")
    w = as_chart_array(w, model.chart_dim, "w")
    theta_h = coframe(model, x)[..., : model.n, :]
    a = np.einsum("...id,...d->...i", theta_h, v)
    b = np.einsum("...id,...d->...i", theta_h, w)
    r = curvature_r_coefficients(structure_tensor(model, x), a, b)
    return np.einsum("...k,...kd->...d", r, model.vertical_frame(x))


def j_matrix(C: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Operator matrix of J_alpha from the structure tensor and alpha's coefficients."""
    pairing = np.einsum("...k,...ijk->...ij", b, C)
    return np.swapaxes(pairing, -1, -2)


def annihilator_coefficients(model: SubmersionModel, x: np.ndarray, alpha: AnnihilatorLike) -> np.ndarray:
    if isinstance(alpha, AnnihilatorCovector):
        b = alpha.coefficients
        if b.shape[-1] != model.vertical_dim:
            raise InputError(f"annihilator has {b.shape[-1]} coefficients, model needs {model.vertical_dim}")
        return b
    return AnnihilatorCovector.from_chart(model, x, alpha).coefficients


def j_operator(model: SubmersionModel, x: np.ndarray, alpha: AnnihilatorLike) -> np.ndarray:
    """J_alpha at x in the basis e_i = dpi(X_i): J[j, i] = alpha R(X_i, X_j).

    Raises:
        InputError: alpha is a chart covector that does not annihilate D.
    """
    x = model.validate_points(x)
    b = annihilator_coefficients(model, x, alpha)
    return j_matrix(structure_tensor(model, x), b)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

def extremal_covector_from_coefficients(
    model: SubmersionModel, x: np.ndarray, b: np.ndarray, a: np.ndarray
) -> np.ndarray:
    """lam with lam(X_i) = a_i and lam(V_k) = b_k."""
    theta = coframe(model, x)
    return np.einsum("...i,...id->...d", a, theta[..., : model.n, :]) + np.einsum(
        "...k,...kd->...d", b, theta[..., model.n :, :]
    )


def extremal_covector(
    model: SubmersionModel, x: np.ndarray, alpha: AnnihilatorLike, v: np.ndarray
) -> np.ndarray:
    """Initial covector of the extremal determined by (alpha, v).

    Its vertical part is alpha and its sharp is the horizontal lift of the base
    vector v at x.
    """
    x = model.validate_points(x)
    v = as_chart_array(v, model.base_chart_dim, "base vector")
    b = annihilator_coefficients(model, x, alpha)
    return extremal_covector_from_coefficients(model, x, b, base_coefficients(model, x, v))


def random_unit_coefficients(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
