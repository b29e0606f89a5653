#!/usr/bin/env python3
"""
Frenet Curvatures
=================
First and second geodesic curvatures of projected geodesics, computed two
independent ways:

- `frenet_curvatures`: Frenet-Serret frame of the sampled base curve with
  fourth-order finite differences and Christoffel-corrected derivatives.
- `kappa_via_extremal`: closed-form values from the extremal data,
  kappa1 = |J_beta eta'| and the second curvature from the derivative of R
  along the curve.

Where kappa1 is below the floor the frame is undefined: kappa2 is reported
as 0 there and at every sample whose stencil reads such a sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from src.criteria import cov_deriv_r_coefficients
from src.exceptions import InputError
from src.flows import Trajectory, require_uniform_grid
from src.geometry_core import SubmersionModel, horizontal_pairings, j_matrix, structure_tensor
from src.stencils import first_derivative, second_derivative, touches_undefined

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
UNIT_SPEED_TOL = 1e-4
KAPPA_FLOOR = 1e-7
ENERGY_DRIFT_TOL = 1e-7
DEFAULT_TOL_CONSTANT = 1e-6
DEFAULT_TOL_VANISH = 1e-5


@dataclass
class CurveVerdict:
    """Classification of a curvature profile."""
    kappa1_constant: bool
    kappa2_vanishing: bool
    geodesic: bool
    kappa1_mean: float
    kappa1_rel_std: float
    kappa2_max: float
    tol_constant: float
    tol_vanish: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kappa1Constant": self.kappa1_constant,
            "kappa2Vanishing": self.kappa2_vanishing,
            "geodesic": self.geodesic,
            "kappa1Mean": self.kappa1_mean,
            "kappa1RelStd": self.kappa1_rel_std,
            "kappa2Max": self.kappa2_max,
            "tolConstant": self.tol_constant,
            "tolVanish": self.tol_vanish,
        }


@dataclass
class CurvatureProfile:
    """Curvatures sampled along a unit-speed base curve."""
    times: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    kappa2_defined: np.ndarray
    method: str
    verdict: CurveVerdict
    base_points: Optional[np.ndarray] = None
    frame: Optional[np.ndarray] = None  # (N, 2, d): e1, e2; e2 is zero where kappa1 is undefined

    @property
    def kappa1_constant(self) -> bool:
        return self.verdict.kappa1_constant

    @property
    def kappa2_vanishing(self) -> bool:
        return self.verdict.kappa2_vanishing


def classify_curve(
    kappa1: np.ndarray,
    kappa2: np.ndarray,
    tol_constant: float = DEFAULT_TOL_CONSTANT,
    tol_vanish: float = DEFAULT_TOL_VANISH,
) -> CurveVerdict:
    """kappa1 constant iff std/mean < tol_constant; kappa2 vanishing iff max < tol_vanish.

    A curve with mean kappa1 below tol_vanish is a geodesic and counts as both.
    """
    kappa1 = np.asarray(kappa1, dtype=float)
    kappa2 = np.asarray(kappa2, dtype=float)
    mean = float(np.mean(kappa1))
    kappa2_max = float(np.max(kappa2)) if kappa2.size else 0.0
    geodesic = mean < tol_vanish
    rel_std = float(np.std(kappa1) / mean) if mean > 0 else 0.0
    return CurveVerdict(
        kappa1_constant=bool(geodesic or rel_std < tol_constant),
        kappa2_vanishing=bool(geodesic or kappa2_max < tol_vanish),
        geodesic=bool(geodesic),
        kappa1_mean=mean,
        kappa1_rel_std=rel_std,
        kappa2_max=kappa2_max,
        tol_constant=tol_constant,
        tol_vanish=tol_vanish,
    )


def classify_profile(
    profile: CurvatureProfile,
    tol_constant: Optional[float] = None,
    tol_vanish: Optional[float] = None,
) -> CurveVerdict:
    """Judge a profile, by default against the tolerances it was built with."""
    return classify_curve(
        profile.kappa1,
        profile.kappa2,
        profile.verdict.tol_constant if tol_constant is None else tol_constant,
        profile.verdict.tol_vanish if tol_vanish is None else tol_vanish,
    )


def _check_samples(traj: Trajectory) -> float:
    if len(traj) < MIN_SAMPLES:
        raise InputError(f"curvature estimation needs at least {MIN_SAMPLES} samples, got {len(traj)}")
    return require_uniform_grid(traj.times)


def _usable(kappa1: np.ndarray) -> np.ndarray:
    undefined = kappa1 <= KAPPA_FLOOR
    return ~undefined & ~touches_undefined(undefined)


def frenet_curvatures(
    model: SubmersionModel,
    eta: Trajectory,
    tol_constant: float = DEFAULT_TOL_CONSTANT,
    tol_vanish: float = DEFAULT_TOL_VANISH,
) -> CurvatureProfile:
    """kappa1, kappa2 of a sampled unit-speed base curve by finite differences.

    Raises:
        InputError: fewer than 8 samples, a non-uniform grid, or speed off 1 by more than 1e-4.
    """
    h = _check_samples(eta)
    y = np.asarray(eta.points, dtype=float)
    if eta.velocities is not None:
        velocity = np.asarray(eta.velocities, dtype=float)
        acceleration = first_derivative(velocity, h)
    else:
        velocity = first_derivative(y, h)
        acceleration = second_derivative(y, h)

    g = model.base_metric(y)
    projector = model.base_tangent_projector(y)
    gamma = model.base_christoffels(y)

    def norm(w: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", w, g, w), 0.0))

    def dot(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return np.einsum("...i,...ij,...j->...", p, g, q)

    speed = norm(velocity)
    worst = float(np.max(np.abs(speed - 1.0)))
    if worst > UNIT_SPEED_TOL:
        raise InputError(f"base curve is not unit speed (max deviation {worst:.3e})")

    covariant = acceleration + np.einsum("...kij,...i,...j->...k", gamma, velocity, velocity)
    covariant = np.einsum("...ij,...j->...i", projector, covariant)
    kappa1 = norm(covariant)
    defined = kappa1 > KAPPA_FLOOR

    e1 = velocity / speed[:, None]
    e2 = np.where(defined[:, None], covariant / np.where(defined, kappa1, 1.0)[:, None], 0.0)
    de2 = first_derivative(e2, h) + np.einsum("...kij,...i,...j->...k", gamma, velocity, e2)
    de2 = np.einsum("...ij,...j->...i", projector, de2)
    normal = de2 - dot(de2, e1)[:, None] * e1 - dot(de2, e2)[:, None] * e2

    usable = _usable(kappa1)
    kappa2 = np.where(usable, norm(normal), 0.0)
    verdict = classify_curve(kappa1, kappa2, tol_constant, tol_vanish)
    logger.debug(f"[{model.name}] frenet: kappa1 mean {verdict.kappa1_mean:.6g}, kappa2 max {verdict.kappa2_max:.3e}")
    frame = np.stack([e1, e2], axis=1)
    return CurvatureProfile(eta.times, kappa1, kappa2, usable, "frenet", verdict, y, frame)


def kappa_via_extremal(
    model: SubmersionModel,
    traj: Trajectory,
    tol_constant: float = DEFAULT_TOL_CONSTANT,
    tol_vanish: float = DEFAULT_TOL_VANISH,
) -> CurvatureProfile:
    """Curvatures of pi(gamma) from the normal extremal (gamma, lam).

    With a = base velocity coefficients, b = vertical part of lam and
    p = J_b a, kappa1 = |p| and

        kappa2 = |w + J_b p - (kappa1'/kappa1) p + kappa1^2 a| / kappa1,

    where w_j = b((nabla_a R)(a, X_j)).

    Raises:
        InputError: the trajectory is not a unit-speed normal geodesic.
    """
    if traj.covectors is None:
        raise InputError("extremal curvature route needs a phase trajectory")
    h = _check_samples(traj)
    x, lam = traj.points, traj.covectors

    a = horizontal_pairings(model, x, lam)
    energy = 0.5 * np.sum(a * a, axis=-1)
    drift = float(np.max(np.abs(energy - energy[0])))
    if drift > ENERGY_DRIFT_TOL * max(1.0, float(energy[0])):
        raise InputError(f"trajectory is not a normal geodesic (energy drift {drift:.3e})")
    worst = float(np.max(np.abs(np.linalg.norm(a, axis=-1) - 1.0)))
    if worst > UNIT_SPEED_TOL:
        raise InputError(f"geodesic is not unit speed (max deviation {worst:.3e})")

    b = np.einsum("...kd,...d->...k", model.vertical_frame(x), lam)
    J = j_matrix(structure_tensor(model, x), b)
    p = np.einsum("...ji,...i->...j", J, a)
    kappa1 = np.linalg.norm(p, axis=-1)
    kappa1_dot = first_derivative(kappa1, h)

    n = model.n
    rows = cov_deriv_r_coefficients(
        model, x, a, np.repeat(a[:, None, :], n, axis=1), np.broadcast_to(np.eye(n), (len(x), n, n))
    )
    w = np.einsum("tik,tk->ti", rows, b)

    usable = _usable(kappa1)
    safe = np.where(usable, kappa1, 1.0)
    numerator = w + np.einsum("...ji,...i->...j", J, p) - (kappa1_dot / safe)[:, None] * p + (kappa1**2)[:, None] * a
    kappa2 = np.where(usable, np.linalg.norm(numerator, axis=-1) / safe, 0.0)

    verdict = classify_curve(kappa1, kappa2, tol_constant, tol_vanish)
    logger.debug(f"[{model.name}] extremal: kappa1 mean {verdict.kappa1_mean:.6g}, kappa2 max {verdict.kappa2_max:.3e}")
    return CurvatureProfile(traj.times, kappa1, kappa2, usable, "extremal", verdict, model.projection(x))

