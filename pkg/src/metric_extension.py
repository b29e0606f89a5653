#!/usr/bin/env python3
"""
Metric Extension
================
The canonical Riemannian cometric on M extending the sub-Riemannian one:

    <a, b>_{g*_M} = <a, b>_{g*} + c <R*a, R*b>_{g*},   c = 2/n by default,

where <R*a, R*b> sums a(R(X_i, X_j)) b(R(X_i, X_j)) over i < j. In frame
components p = F lam the form is block-diag(I_n, c S) with
S_kl = sum_{i<j} C_ijk C_ijl.

Also: non-degeneracy and step-2 decomposition checks, the normalization
identity, and the comparison of sub-Riemannian and extended-metric
geodesic projections.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import null_space

from src.exceptions import InputError
from src.flows import (
    Trajectory,
    integrate_extended_geodesics,
    integrate_normal_geodesics,
    normalize_covectors,
    project_trajectory,
)
from src.geometry_core import (
    FD_STEP,
    PhaseState,
    SubmersionModel,
    annihilator_coefficients,
    as_chart_array,
    frame_jacobians,
    j_matrix,
    structure_tensor,
)
from src.reports import CheckReport, build_check_report

logger = logging.getLogger(__name__)

NONDEGENERACY_FLOOR = 1e-10
RANK_TOL = 1e-10


class ExtendedCometric:
    """Riemannian cometric g*_M of a model with a given normalization constant."""

    def __init__(self, model: SubmersionModel, normalization: Optional[float] = None) -> None:
        if normalization is None:
            normalization = 2.0 / model.n
        if not (np.isfinite(normalization) and normalization > 0):
            raise InputError(f"normalization constant must be positive, got {normalization}")
        self.model = model
        self.normalization = float(normalization)

    def structure_gram(self, x: np.ndarray) -> np.ndarray:
        """S_kl = sum_{i<j} C_ijk C_ijl."""
        C = structure_tensor(self.model, x)
        upper_i, upper_j = np.triu_indices(self.model.n, 1)
        pairs = C[..., upper_i, upper_j, :]
        return np.einsum("...pk,...pl->...kl", pairs, pairs)

    def vertical_gram(self, x: np.ndarray) -> np.ndarray:
        """Gram matrix of the annihilator coframe under g*_M."""
        return self.normalization * self.structure_gram(x)

    def frame_matrix(self, x: np.ndarray) -> np.ndarray:
        n, m = self.model.n, self.model.m
        vertical = self.vertical_gram(x)
        out = np.zeros(vertical.shape[:-2] + (m, m))
        out[..., :n, :n] = np.eye(n)
        out[..., n:, n:] = vertical
        return out

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """g*_M in the chart coframe: F^T B F."""
        frame = self.model.frame(x)
        return np.einsum("...ad,...ab,...be->...de", frame, self.frame_matrix(x), frame)

    def inner(self, x: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
        return np.einsum("...d,...de,...e->...", alpha, self.matrix(x), beta)

    def annihilator_inner(self, x: np.ndarray, b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
        """<alpha, beta>_{g*_M} for annihilators given by vertical coefficients."""
        return np.einsum("...k,...kl,...l->...", b1, self.vertical_gram(x), b2)

    def min_eigenvalue(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.eigvalsh(self.frame_matrix(x))[..., 0]

    def hamiltonian(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        p = np.einsum("...ad,...d->...a", self.model.frame(x), lam)
        return 0.5 * np.einsum("...a,...ab,...b->...", p, self.frame_matrix(x), p)

    def hamiltonian_gradient(self, x: np.ndarray, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(dH/dx, dH/dlam) of H = 1/2 lam^T g*_M(x) lam."""
        model = self.model
        n = model.n
        frame = model.frame(x)
        jac = frame_jacobians(model, x)
        p = np.einsum("...ad,...d->...a", frame, lam)
        bp = np.einsum("...ab,...b->...a", self.frame_matrix(x), p)
        dh_dlam = np.einsum("...a,...ad->...d", bp, frame)
        dh_dx = np.einsum("...a,...acd,...c->...d", bp, jac, lam)
        if not model.constant_structure:
            offsets = FD_STEP * np.eye(model.chart_dim)
            plus = self.vertical_gram(x[..., None, :] + offsets)
            minus = self.vertical_gram(x[..., None, :] - offsets)
            d_gram = (plus - minus) / (2.0 * FD_STEP)
            pv = p[..., n:]
            dh_dx = dh_dx + 0.5 * np.einsum("...k,...dkl,...l->...d", pv, d_gram, pv)
        return dh_dx, dh_dlam


def extended_cometric(model: SubmersionModel, x: np.ndarray, normalization: Optional[float] = None) -> np.ndarray:
    """Matrix of g*_M at x in the chart coframe."""
    return ExtendedCometric(model, normalization).matrix(model.validate_points(x))


def check_nondegenerate(
    model: SubmersionModel, points: np.ndarray, normalization: Optional[float] = None
) -> CheckReport:
    """Positive-definiteness of g*_M at every point.

    The residual is 1 / lambda_min (infinite when lambda_min <= 0) judged
    against 1e10, i.e. pass iff lambda_min > 1e-10.
    """
    points = np.atleast_2d(model.validate_points(points))
    cometric = ExtendedCometric(model, normalization)
    frame_matrices = cometric.frame_matrix(points)
    smallest = np.linalg.eigvalsh(frame_matrices)[..., 0]
    residuals = np.where(smallest > 0, 1.0 / np.where(smallest > 0, smallest, 1.0), np.inf)

    witnesses = []
    for point, lam_min, mat in zip(points, smallest, frame_matrices):
        entry = {"point": point, "minEigenvalue": float(lam_min)}
        if lam_min <= NONDEGENERACY_FLOOR:
            entry["kernelFrameCoefficients"] = null_space(mat, rcond=NONDEGENERACY_FLOOR).T
        witnesses.append(entry)
    report = build_check_report(
        "nondegenerate", residuals, 1.0 / NONDEGENERACY_FLOOR, witnesses,
        details={"minEigenvalue": float(np.min(smallest)), "normalization": cometric.normalization},
    )
    logger.info(f"[{model.name}] nondegenerate: {'pass' if report.passed else 'FAIL'} "
                f"(min eigenvalue {np.min(smallest):.3e})")
    return report


def step2_span(model: SubmersionModel, x: np.ndarray) -> np.ndarray:
    """Rows spanning D + im R at x, in frame coefficients."""
    n, m = model.n, model.m
    C = structure_tensor(model, x)
    upper_i, upper_j = np.triu_indices(n, 1)
    curvature_rows = np.zeros(C.shape[:-3] + (len(upper_i), m))
    curvature_rows[..., n:] = C[..., upper_i, upper_j, :]
    horizontal_rows = np.broadcast_to(np.eye(n, m), C.shape[:-3] + (n, m))
    return np.concatenate([horizontal_rows, curvature_rows], axis=-2)


def check_step2_decomposition(model: SubmersionModel, points: np.ndarray) -> CheckReport:
    """TM = D + im R: residual m - rank at each point, pass iff full rank."""
    points = np.atleast_2d(model.validate_points(points))
    spans = step2_span(model, points)
    ranks = np.array([np.linalg.matrix_rank(s, tol=RANK_TOL) for s in spans])
    residuals = (model.m - ranks).astype(float)
    witnesses = []
    for point, rank, span in zip(points, ranks, spans):
        entry = {"point": point, "rank": int(rank)}
        if rank < model.m:
            entry["missingDirections"] = null_space(span, rcond=RANK_TOL).T
        witnesses.append(entry)
    report = build_check_report("step2-decomposition", residuals, 0.5, witnesses, details={"m": model.m})
    logger.info(f"[{model.name}] step2-decomposition: {'pass' if report.passed else 'FAIL'}")
    return report


def normalization_identity_residual(
    model: SubmersionModel,
    x: np.ndarray,
    alpha,
    trials: int = 10,
    rng: Optional[np.random.Generator] = None,
    normalization: Optional[float] = None,
) -> float:
    """max over random orthonormal bases of | |alpha|^2_{g*_M} - (1/n) sum_i |J_alpha v_i|^2 |."""
    x = model.validate_points(x)
    rng = rng or np.random.default_rng(0)
    b = annihilator_coefficients(model, x, alpha)
    cometric = ExtendedCometric(model, normalization)
    norm_sq = float(cometric.annihilator_inner(x, b, b))
    J = j_matrix(structure_tensor(model, x), b)
    worst = 0.0
    for _ in range(max(1, trials)):
        basis, _ = np.linalg.qr(rng.normal(size=(model.n, model.n)))
        images = J @ basis
        worst = max(worst, abs(norm_sq - float(np.sum(images * images)) / model.n))
    return worst


def arc_length(base: Trajectory, model: SubmersionModel) -> np.ndarray:
    g = model.base_metric(base.points)
    speed = np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", base.velocities, g, base.velocities), 0.0))
    if len(base) == 1:
        return np.zeros(1)
    return cumulative_trapezoid(speed, base.times, initial=0.0)


def resample_by_arc_length(base: Trajectory, model: SubmersionModel, s: np.ndarray) -> np.ndarray:
    """Base points at arc lengths s by cubic Hermite interpolation.

    Node slopes are the unit tangents velocity/speed, so the resampling error is
    fourth order in the step.
    """
    g = model.base_metric(base.points)
    speed = np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", base.velocities, g, base.velocities), 0.0))
    nodes = arc_length(base, model)
    if np.any(np.diff(nodes) <= 0.0):
        raise InputError("arc length must increase strictly along the curve")
    spline = CubicHermiteSpline(nodes, base.points, base.velocities / speed[:, None], axis=0)
    return spline(np.asarray(s, dtype=float))


def compare_projections(
    model: SubmersionModel,
    state0: PhaseState,
    T: float,
    h: float,
    normalization: Optional[float] = None,
) -> float:
    """Max base distance between the projections of the sub-Riemannian and the
    extended-metric geodesics with the same (unit-normalized) initial covector,
    matched by arc length of the projection (cubic Hermite resampling).
    """
    x0 = model.validate_points(state0.x)[None, :]
    lam0 = as_chart_array(state0.lam, model.chart_dim, "covector")[None, :]
    lam0, _ = normalize_covectors(model, x0, lam0)
    cometric = ExtendedCometric(model, normalization)

    sub_riemannian = project_trajectory(model, integrate_normal_geodesics(model, x0, lam0, T, h, normalize=False)[0])
    riemannian = project_trajectory(model, integrate_extended_geodesics(model, cometric, x0, lam0, T, h)[0])

    s_sr = arc_length(sub_riemannian, model)
    s_r = arc_length(riemannian, model)
    if s_sr[-1] < 1e-12 or s_r[-1] < 1e-12:
        return float(np.max(np.linalg.norm(sub_riemannian.points - riemannian.points, axis=-1)))

    common = min(s_sr[-1], s_r[-1])
    keep = s_sr <= common
    matched = resample_by_arc_length(riemannian, model, s_sr[keep])
    deviation = float(np.max(np.linalg.norm(sub_riemannian.points[keep] - matched, axis=-1)))
    logger.debug(f"[{model.name}] projection deviation {deviation:.3e} over arc length {common:.4g}")
    return deviation
