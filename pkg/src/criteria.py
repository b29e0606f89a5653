#!/usr/bin/env python3
"""
Criteria
========
Numerical verification of the conditions characterizing submersions whose
normal geodesics project to curves of constant first geodesic curvature (and
vanishing second curvature):

- covariant derivative of the curvature R along horizontal directions
- |J_beta(t) eta'| constant / J_beta(t) eta' parallel along base geodesics
- J_a^2 v = -|J_a v|^2 v, orthogonality of J_a v and J_a w
- H-type and polarization identities, the local diagonal condition
- the curvature identity R(u,v)^2 w = -|R(u,v)w|^2 w on the base
- transverse symmetries and commuting vertical fields

Probes are batched: points x have shape (P, chart_dim), annihilators are
given by vertical coefficients b (P, m-n) and directions by horizontal
coefficients a (P, n) in the basis e_i = dpi(X_i).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from src.exceptions import GeometryError, InputError, NumericalError
from src.flows import integrate_lifted_geodesics
from src.geometry_core import (
    AnnihilatorCovector,
    SubmersionModel,
    all_brackets,
    annihilator_coefficients,
    as_chart_array,
    base_coefficients,
    base_vector,
    coframe,
    j_matrix,
    random_unit_coefficients,
    structure_tensor,
)
from src.metric_extension import ExtendedCometric
from src.reports import CheckReport, build_check_report

logger = logging.getLogger(__name__)

COV_DERIV_STEP = 1e-4
COV_DERIV_SUBSTEPS = 4
ADMISSIBLE_FLOOR = 1e-10
UNIT_TOL = 1e-8


@dataclass
class Probes:
    """Random probe data: points, annihilator coefficients and unit directions."""
    points: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    vs: np.ndarray
    ws: np.ndarray
    us: np.ndarray

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def witness(self, index: int) -> dict:
        return {"point": self.points[index], "alpha": self.alphas[index], "v": self.vs[index]}


def sample_probes(model: SubmersionModel, rng: np.random.Generator, count: int) -> Probes:
    k, n = model.vertical_dim, model.n
    return Probes(
        points=model.random_points(rng, count),
        alphas=rng.normal(size=(count, k)),
        betas=rng.normal(size=(count, k)),
        vs=random_unit_coefficients(rng, count, n),
        ws=random_unit_coefficients(rng, count, n),
        us=random_unit_coefficients(rng, count, n),
    )


# ---------------------------------------------------------------------------
# Input handling
# ---------------------------------------------------------------------------

def _points(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(model.validate_points(x))


def _alpha_coefficients(model: SubmersionModel, x: np.ndarray, alpha) -> np.ndarray:
    """Vertical coefficients for an AnnihilatorCovector, a coefficient array or chart covectors."""
    if isinstance(alpha, AnnihilatorCovector):
        return np.broadcast_to(annihilator_coefficients(model, x[0], alpha), (len(x), model.vertical_dim))
    arr = np.asarray(alpha, dtype=float)
    if arr.shape[-1] == model.vertical_dim:
        return np.broadcast_to(arr, (len(x), model.vertical_dim))
    arr = np.broadcast_to(as_chart_array(arr, model.chart_dim, "alpha"), x.shape)
    return np.stack([annihilator_coefficients(model, xi, ai) for xi, ai in zip(x, arr)])


def _direction_coefficients(model: SubmersionModel, x: np.ndarray, v, unit: bool = True) -> np.ndarray:
    """Horizontal coefficients from coefficients (length n) or base vectors."""
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError("direction has non-finite entries")
    if arr.shape[-1] == model.n:
        a = np.broadcast_to(arr, (len(x), model.n))
    elif arr.shape[-1] == model.base_chart_dim:
        a = base_coefficients(model, x, np.broadcast_to(arr, (len(x), model.base_chart_dim)))
    else:
        raise InputError(f"direction must have length {model.n} or {model.base_chart_dim}, got {arr.shape}")
    if unit and np.max(np.abs(np.linalg.norm(a, axis=-1) - 1.0)) > UNIT_TOL:
        raise InputError("direction must be a unit vector")
    return np.array(a)


def _horizontal_chart_coefficients(model: SubmersionModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    v = as_chart_array(v, model.chart_dim, "vector")
    theta = coframe(model, x)
    vertical = np.einsum("...kd,...d->...k", theta[..., model.n :, :], v)
    scale = max(1.0, float(np.max(np.abs(v))))
    if np.max(np.abs(vertical)) > 1e-6 * scale:
        raise InputError("vector is not horizontal")
    return np.einsum("...id,...d->...i", theta[..., : model.n, :], v)


# ---------------------------------------------------------------------------
# Covariant derivative of R
# ---------------------------------------------------------------------------

def cov_deriv_r_coefficients(
    model: SubmersionModel,
    x: np.ndarray,
    v: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    step: float = COV_DERIV_STEP,
    substeps: int = COV_DERIV_SUBSTEPS,
) -> np.ndarray:
    """(nabla_v R)(a, b) in vertical coefficients, for batches of pairs.

    x (B, chart_dim), v (B, n); a, b (B, P, n). Returns (B, P, m-n).

    The pair is transported along the base geodesic with velocity +-v, the
    vertical coframe along its horizontal lift; R of the transported pair is
    paired with the transported coframe and central-differenced.
    """
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    batch, pairs = a.shape[0], a.shape[1]
    k = model.vertical_dim

    vectors = np.concatenate(
        [base_vector(model, x[:, None, :], a), base_vector(model, x[:, None, :], b)], axis=1
    )
    coframe_coefficients = np.broadcast_to(np.eye(k), (batch, k, k))

    pairings = []
    for sign in (1.0, -1.0):
        lifted = integrate_lifted_geodesics(
            model, x, sign * v, step, step / substeps,
            annihilators=coframe_coefficients, base_vectors=vectors,
        )
        end = lifted.lift_points[-1]
        coeffs = base_coefficients(model, end[:, None, :], lifted.base_vectors[-1])
        C = structure_tensor(model, end)
        curvature = np.einsum("bpi,bpj,bijk->bpk", coeffs[:, :pairs], coeffs[:, pairs:], C)
        pairings.append(np.einsum("blk,bpk->bpl", lifted.annihilators[-1], curvature))

    result = (pairings[0] - pairings[1]) / (2.0 * step)
    if not np.all(np.isfinite(result)):
        raise NumericalError("covariant derivative of R is not finite")
    return result


def cov_deriv_r(model: SubmersionModel, x: np.ndarray, v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(nabla_v R)(a, b) at x for horizontal chart vectors; returns a vertical chart vector."""
    x = model.validate_points(x)
    coeff = [_horizontal_chart_coefficients(model, x, w) for w in (v, a, b)]
    r = cov_deriv_r_coefficients(model, x[None, :], coeff[0][None, :], coeff[1][None, None, :], coeff[2][None, None, :])
    return np.einsum("k,kd->d", r[0, 0], model.vertical_frame(x))


def _derivative_pairing_rows(model: SubmersionModel, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """(nabla_v R)(v, X_i) for v = a, stacked over i: (P, n, m-n)."""
    n = model.n
    repeated = np.repeat(a[:, None, :], n, axis=1)
    basis = np.broadcast_to(np.eye(n), (len(x), n, n))
    return cov_deriv_r_coefficients(model, x, a, repeated, basis)


# ---------------------------------------------------------------------------
# Theorem checks along base geodesics
# ---------------------------------------------------------------------------

def j_length_profiles(
    model: SubmersionModel, x: np.ndarray, b: np.ndarray, a: np.ndarray, T: float, h: float, transport_initial: bool = False
):
    """J_beta(t) eta'(t) along the base geodesics from (pi(x), sum a_i e_i).

    Returns (times, J eta' coefficients (N, P, n), lift points (N, P, d),
    transported J_alpha v as base vectors (N, P, base_chart_dim) or None).
    """
    J0 = j_matrix(structure_tensor(model, x), b)
    jv = np.einsum("...ji,...i->...j", J0, a)
    base_vectors = base_vector(model, x, jv)[:, None, :] if transport_initial else None
    lifted = integrate_lifted_geodesics(model, x, a, T, h, annihilators=b[:, None, :], base_vectors=base_vectors)
    lift = lifted.lift_points
    a_t = base_coefficients(model, lift, lifted.base_velocities)
    J_t = j_matrix(structure_tensor(model, lift), lifted.annihilators[:, :, 0, :])
    jeta = np.einsum("...ji,...i->...j", J_t, a_t)
    transported = lifted.base_vectors[:, :, 0, :] if transport_initial else None
    return lifted.times, jeta, lift, transported


def check_theorem1(model: SubmersionModel, x, alpha, v, T: float, h: float = 1e-3, tolerance: float = 1e-5) -> CheckReport:
    """max_t | |J_beta(t) eta'(t)| - |J_alpha v| | over the probes."""
    x = _points(model, x)
    b = _alpha_coefficients(model, x, alpha)
    a = _direction_coefficients(model, x, v)
    _, jeta, _, _ = j_length_profiles(model, x, b, a, T, h)
    lengths = np.linalg.norm(jeta, axis=-1)
    residuals = np.max(np.abs(lengths - lengths[0]), axis=0)
    witnesses = [{"point": x[p], "alpha": b[p], "v": a[p], "initialLength": lengths[0, p]} for p in range(len(x))]
    return build_check_report("theorem1", residuals, tolerance, witnesses, details={"T": T, "h": h})


def check_theorem2_parallel(
    model: SubmersionModel, x, alpha, v, T: float, h: float = 1e-3, tolerance: float = 1e-5
) -> CheckReport:
    """max_t |J_beta(t) eta'(t) - P_t(J_alpha v)| with P_t Levi-Civita transport on N."""
    x = _points(model, x)
    b = _alpha_coefficients(model, x, alpha)
    a = _direction_coefficients(model, x, v)
    _, jeta, lift, transported = j_length_profiles(model, x, b, a, T, h, transport_initial=True)
    field = base_vector(model, lift, jeta)
    diff = field - transported
    g = model.base_metric(model.projection(lift))
    residuals = np.max(np.sqrt(np.einsum("...i,...ij,...j->...", diff, g, diff)), axis=0)
    witnesses = [{"point": x[p], "alpha": b[p], "v": a[p]} for p in range(len(x))]
    return build_check_report("theorem2-parallel", residuals, tolerance, witnesses, details={"T": T, "h": h})


# ---------------------------------------------------------------------------
# Pointwise algebraic checks
# ---------------------------------------------------------------------------

def _single_or_batch(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def check_j2(model: SubmersionModel, x, alpha, v):
    """|J_a^2 v + |J_a v|^2 v| for unit v."""
    single = np.ndim(x) == 1
    x = _points(model, x)
    b = _alpha_coefficients(model, x, alpha)
    a = _direction_coefficients(model, x, v)
    J = j_matrix(structure_tensor(model, x), b)
    jv = np.einsum("...ji,...i->...j", J, a)
    jjv = np.einsum("...ji,...i->...j", J, jv)
    residual = np.linalg.norm(jjv + np.sum(jv * jv, axis=-1, keepdims=True) * a, axis=-1)
    return _single_or_batch(residual, single)


def _unit(vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return vectors / safe, norms[..., 0]


def check_rvrw_orthogonality(model: SubmersionModel, x, alpha, v, w):
    """|<J_a v, J_a w>| after projecting w onto the complement of span{v, J_a v}.

    An empty complement gives residual 0.
    """
    single = np.ndim(x) == 1
    x = _points(model, x)
    b = _alpha_coefficients(model, x, alpha)
    a, _ = _unit(_direction_coefficients(model, x, v, unit=False))
    w, _ = _unit(_direction_coefficients(model, x, w, unit=False))
    J = j_matrix(structure_tensor(model, x), b)
    jv = np.einsum("...ji,...i->...j", J, a)

    w = w - np.sum(w * a, axis=-1, keepdims=True) * a
    jv_unit, jv_norm = _unit(jv)
    jv_unit = np.where((jv_norm > ADMISSIBLE_FLOOR)[:, None], jv_unit, 0.0)
    w = w - np.sum(w * jv_unit, axis=-1, keepdims=True) * jv_unit
    w_unit, w_norm = _unit(w)
    jw = np.einsum("...ji,...i->...j", J, w_unit)
    residual = np.where(w_norm > ADMISSIBLE_FLOOR, np.abs(np.sum(jv * jw, axis=-1)), 0.0)
    return _single_or_batch(residual, single)


def check_dot_kappa(model: SubmersionModel, x, alpha, v):
    """|<aR(v,.), a(nabla_v R)(v,.)>_{g*}|."""
    single = np.ndim(x) == 1
    x = _points(model, x)
    b = _alpha_coefficients(model, x, alpha)
    a = _direction_coefficients(model, x, v)
    J = j_matrix(structure_tensor(model, x), b)
    p = np.einsum("...ji,...i->...j", J, a)
    derivative = np.einsum("pik,pk->pi", _derivative_pairing_rows(model, x, a), b)
    residual = np.abs(np.sum(p * derivative, axis=-1))
    return _single_or_batch(residual, single)


def htype_residuals(model: SubmersionModel, x: np.ndarray, b1: np.ndarray, b2: np.ndarray, normalization=None):
    """Operator-norm residuals of J_a^2 + |a|^2 I and J_a J_b + J_b J_a + 2<a, b> I."""
    cometric = ExtendedCometric(model, normalization)
    gram = cometric.vertical_gram(x)
    if np.min(np.linalg.eigvalsh(gram)) <= 0:
        raise GeometryError(f"extended cometric of '{model.name}' is degenerate on Ann(D)")
    C = structure_tensor(model, x)
    Ja, Jb = j_matrix(C, b1), j_matrix(C, b2)
    eye = np.eye(model.n)
    aa = np.einsum("...k,...kl,...l->...", b1, gram, b1)
    ab = np.einsum("...k,...kl,...l->...", b1, gram, b2)
    square = Ja @ Ja + aa[..., None, None] * eye
    polar = Ja @ Jb + Jb @ Ja + 2.0 * ab[..., None, None] * eye
    return np.linalg.norm(square, ord=2, axis=(-2, -1)), np.linalg.norm(polar, ord=2, axis=(-2, -1))


def check_htype(model: SubmersionModel, x, alpha, beta, tolerance: float = 1e-10, normalization=None) -> CheckReport:
    """H-type identity and its polarization with norms from g*_M."""
    x = _points(model, x)
    b1 = _alpha_coefficients(model, x, alpha)
    b2 = _alpha_coefficients(model, x, beta)
    square, polar = htype_residuals(model, x, b1, b2, normalization)
    residuals = np.maximum(square, polar)
    witnesses = [
        {"point": x[p], "alpha": b1[p], "beta": b2[p], "square": square[p], "polarization": polar[p]}
        for p in range(len(x))
    ]
    return build_check_report(
        "htype", residuals, tolerance, witnesses,
        details={"maxSquareResidual": float(np.max(square)), "maxPolarizationResidual": float(np.max(polar))},
    )


def local_condition_d_residuals(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """Per point: max_k of off-diagonal mass plus negative-eigenvalue mass of -A_k^2,
    A_k[i, j] = d theta_k(X_i, X_j) = -theta_k([X_i, X_j])."""
    A = -np.moveaxis(structure_tensor(model, x), -1, -3)
    M = -(A @ A)
    off_diagonal = np.sum(np.abs(M), axis=(-2, -1)) - np.sum(np.abs(np.diagonal(M, axis1=-2, axis2=-1)), axis=-1)
    sym = 0.5 * (M + np.swapaxes(M, -1, -2))
    negative = np.sum(np.maximum(-np.linalg.eigvalsh(sym), 0.0), axis=-1)
    return np.max(off_diagonal + negative, axis=-1)


def check_local_condition_d(model: SubmersionModel, x, tolerance: float = 1e-10) -> CheckReport:
    x = _points(model, x)
    residuals = local_condition_d_residuals(model, x)
    return build_check_report("local-condition-d", residuals, tolerance, [{"point": p} for p in x])


# ---------------------------------------------------------------------------
# Base curvature identity
# ---------------------------------------------------------------------------

CurvatureOperator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def constant_curvature_tensor(k: float) -> CurvatureOperator:
    """R(u, v)w = k(<v, w>u - <u, w>v) in an orthonormal basis."""

    def curvature(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return k * (np.sum(v * w, axis=-1, keepdims=True) * u - np.sum(u * w, axis=-1, keepdims=True) * v)

    return curvature


def check_r2(curv_op: CurvatureOperator, u, v, w, inner: Optional[Callable] = None):
    """|R(u,v)R(u,v)w + |R(u,v)w|^2 w|."""
    u, v, w = (np.asarray(z, dtype=float) for z in (u, v, w))
    if inner is None:
        def inner(p, q):
            return np.sum(p * q, axis=-1)
    rw = curv_op(u, v, w)
    rrw = curv_op(u, v, rw)
    diff = rrw + inner(rw, rw)[..., None] * w
    residual = np.sqrt(np.maximum(inner(diff, diff), 0.0))
    return float(residual) if np.ndim(residual) == 0 else residual


# ---------------------------------------------------------------------------
# Frame probes
# ---------------------------------------------------------------------------

def transverse_symmetry_residuals(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """Vertical fields preserve D and act skew-symmetrically on it."""
    n = model.n
    brackets = all_brackets(model, x)[..., n:, :n, :]
    theta = coframe(model, x)
    coeffs = np.einsum("...kid,...ad->...kia", brackets, theta)
    vertical_part = np.max(np.abs(coeffs[..., n:]), axis=(-3, -2, -1))
    M = coeffs[..., :n]
    skew = np.max(np.abs(M + np.swapaxes(M, -1, -2)), axis=(-3, -2, -1))
    return np.maximum(vertical_part, skew)


def vertical_abelian_residuals(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    n = model.n
    brackets = all_brackets(model, x)[..., n:, n:, :]
    return np.max(np.abs(brackets), axis=(-3, -2, -1))


def parallel_curvature_residuals(model: SubmersionModel, x: np.ndarray, v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|(nabla_v R)(a, b)| per probe."""
    r = cov_deriv_r_coefficients(model, x, v, a[:, None, :], b[:, None, :])
    return np.linalg.norm(r[:, 0], axis=-1)


def cyclic_cov_deriv_residuals(model: SubmersionModel, x: np.ndarray, u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """|(nabla_u R)(v,w) + (nabla_v R)(w,u) + (nabla_w R)(u,v)| per probe."""
    points = np.concatenate([x, x, x])
    directions = np.concatenate([u, v, w])
    first = np.concatenate([v, w, u])[:, None, :]
    second = np.concatenate([w, u, v])[:, None, :]
    r = cov_deriv_r_coefficients(model, points, directions, first, second)[:, 0]
    count = len(x)
    return np.linalg.norm(r[:count] + r[count : 2 * count] + r[2 * count :], axis=-1)
