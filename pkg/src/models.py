#!/usr/bin/env python3
"""
Built-in Submersion Models
==========================
Concrete SubmersionModel realizations:

- CarnotModel: step-2 Carnot groups in exponential coordinates, built from
  structure constants c[i, j, k] with [X_i, X_j] = sum_k c[i, j, k] V_k.
  Frames X_i = d_i + 1/2 sum_{j,k} c[j, i, k] x_j d_{z_k}, V_k = d_{z_k};
  pi(x, z) = x onto Euclidean R^n.
- HopfModel: S^3 (unit quaternions in ambient R^4) over the radius-1/2
  sphere in R^3. Horizontal q*j, q*k, vertical q*i, pi(q) = 1/2 q i conj(q).
  The radius 1/2 makes dpi an isometry on the horizontal distribution.
- TwistedHeisenbergModel: X = d_x, Y = d_y + (x + x^2/2) d_z, V = d_z on
  x > -1; its curvature 1 + x is not parallel.

Plus the registry used by configs and the CLI, and the invariant suite.
"""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from src.exceptions import GeometryError, InputError, ModelConstructionError
from src.geometry_core import (
    BracketMode,
    SubmersionModel,
    as_chart_array,
    base_frame,
    coframe,
)
from src.quaternions import UNIT_I, UNIT_J, UNIT_K, left_matrix, random_unit_quaternions, right_matrix
from src.reports import CheckReport, build_check_report

logger = logging.getLogger(__name__)

MODEL_SEED = 0x5EED
HOPF_RADIUS = 0.5
SPHERE_TOL = 1e-9


class CarnotModel(SubmersionModel):
    """Step-2 Carnot group from structure constants."""

    def __init__(
        self,
        structure_constants: np.ndarray,
        name: str = "step2-carnot",
        bracket_mode: BracketMode = BracketMode.ANALYTIC,
        require_bracket_generating: bool = True,
    ) -> None:
        c = np.array(structure_constants, dtype=float)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[2] < 1:
            raise ModelConstructionError(f"structure constants must have shape (n, n, m-n), got {c.shape}")
        n, k = c.shape[0], c.shape[2]
        super().__init__(
            name=name,
            n=n,
            m=n + k,
            chart_dim=n + k,
            base_chart_dim=n,
            bracket_mode=bracket_mode,
            constant_structure=True,
            base_sectional_curvature=0.0,
        )
        if not np.all(np.isfinite(c)):
            raise ModelConstructionError("structure constants must be finite")
        if np.max(np.abs(c + np.swapaxes(c, 0, 1))) > 1e-12:
            raise ModelConstructionError("structure constants must satisfy c[i, j, k] = -c[j, i, k]")

        deficient = bracket_deficiency(c)
        if deficient.shape[1] and require_bracket_generating:
            raise ModelConstructionError(
                f"structure constants are not bracket-generating; "
                f"{deficient.shape[1]} vertical direction(s) unreached: "
                f"{np.round(deficient.T, 12).tolist()}",
                deficient_directions=[d for d in deficient.T],
            )

        self.structure_constants = c
        self.structure_constants.setflags(write=False)

        # dX_i^{n+k}/dx_j = 1/2 c[j, i, k]
        jac = np.zeros((self.m, self.m, self.m))
        jac[:n, n:, :n] = 0.5 * np.transpose(c, (1, 2, 0))
        self._jacobians = jac
        self._jacobians.setflags(write=False)
        logger.info(f"Built Carnot model '{name}' (n={n}, m={self.m})")

    def frame(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n, m = self.n, self.m
        lead = x.shape[:-1]
        frame = np.zeros(lead + (m, m))
        frame[..., :, :] = np.eye(m)
        frame[..., :n, n:] = 0.5 * np.einsum("jik,...j->...ik", self.structure_constants, x[..., :n])
        return frame

    def analytic_frame_jacobians(self, x: np.ndarray) -> np.ndarray:
        return self._jacobians

    def projection(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)[..., : self.n]

    def projection_jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        jac = np.eye(self.n, self.m)
        return np.broadcast_to(jac, x.shape[:-1] + jac.shape)

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(count, self.m))


class HopfModel(SubmersionModel):
    """Hopf fibration S^3 -> S^2(1/2) in ambient quaternion coordinates."""

    def __init__(self, bracket_mode: BracketMode = BracketMode.ANALYTIC) -> None:
        super().__init__(
            name="hopf",
            n=2,
            m=3,
            chart_dim=4,
            base_chart_dim=3,
            bracket_mode=bracket_mode,
            constant_structure=True,
            base_sectional_curvature=1.0 / HOPF_RADIUS**2,
        )
        self.radius = HOPF_RADIUS
        # X_1 = q j, X_2 = q k, V = q i are linear in q
        self._matrices = np.stack([right_matrix(UNIT_J), right_matrix(UNIT_K), right_matrix(UNIT_I)])
        self._matrices.setflags(write=False)
        logger.info("Built Hopf model (n=2, m=3, ambient R^4)")

    def frame(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("acd,...d->...ac", self._matrices, np.asarray(x, dtype=float))

    def analytic_frame_jacobians(self, x: np.ndarray) -> np.ndarray:
        return self._matrices

    def projection(self, x: np.ndarray) -> np.ndarray:
        a, b, c, d = np.moveaxis(np.asarray(x, dtype=float), -1, 0)
        return 0.5 * np.stack([a * a + b * b - c * c - d * d, 2 * (b * c + a * d), 2 * (b * d - a * c)], axis=-1)

    def projection_jacobian(self, x: np.ndarray) -> np.ndarray:
        a, b, c, d = np.moveaxis(np.asarray(x, dtype=float), -1, 0)
        rows = [
            np.stack([a, b, -c, -d], axis=-1),
            np.stack([d, c, b, a], axis=-1),
            np.stack([-c, d, -a, b], axis=-1),
        ]
        return np.stack(rows, axis=-2)

    def base_christoffels(self, y: np.ndarray) -> np.ndarray:
        # Gamma^k_ij = delta_ij y^k / r^2 in ambient coordinates
        y = np.asarray(y, dtype=float)
        return np.einsum("...k,ij->...kij", y, np.eye(3)) / self.radius**2

    def tangent_projector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        unit = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return np.eye(4) - np.einsum("...i,...j->...ij", unit, unit)

    def base_tangent_projector(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        unit = y / np.linalg.norm(y, axis=-1, keepdims=True)
        return np.eye(3) - np.einsum("...i,...j->...ij", unit, unit)

    def validate_points(self, x: np.ndarray) -> np.ndarray:
        x = as_chart_array(x, 4, "point")
        off = np.max(np.abs(np.linalg.norm(x, axis=-1) - 1.0))
        if off > SPHERE_TOL:
            raise GeometryError(f"point is off the unit sphere by {off:.3e} (tolerance {SPHERE_TOL:g})")
        return x

    def validate_base_points(self, y: np.ndarray) -> np.ndarray:
        y = as_chart_array(y, 3, "base point")
        off = np.max(np.abs(np.linalg.norm(y, axis=-1) - self.radius))
        if off > SPHERE_TOL:
            raise GeometryError(f"base point is off the radius-{self.radius} sphere by {off:.3e}")
        return y

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return random_unit_quaternions(rng, count)


class TwistedHeisenbergModel(SubmersionModel):
    """Heisenberg-like model whose curvature grows along x."""

    def __init__(self, bracket_mode: BracketMode = BracketMode.ANALYTIC) -> None:
        super().__init__(
            name="twisted-heisenberg",
            n=2,
            m=3,
            chart_dim=3,
            base_chart_dim=2,
            bracket_mode=bracket_mode,
            constant_structure=False,
            base_sectional_curvature=0.0,
        )
        logger.info("Built twisted Heisenberg model (n=2, m=3)")

    def frame(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        frame = np.zeros(x.shape[:-1] + (3, 3))
        frame[..., :, :] = np.eye(3)
        frame[..., 1, 2] = x[..., 0] + 0.5 * x[..., 0] ** 2
        return frame

    def analytic_frame_jacobians(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        jac = np.zeros(x.shape[:-1] + (3, 3, 3))
        jac[..., 1, 2, 0] = 1.0 + x[..., 0]
        return jac

    def projection(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)[..., :2]

    def projection_jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(2, 3), x.shape[:-1] + (2, 3))

    def validate_points(self, x: np.ndarray) -> np.ndarray:
        x = as_chart_array(x, 3, "point")
        if np.any(x[..., 0] <= -1.0):
            raise GeometryError("twisted-heisenberg chart requires x > -1")
        return x

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        points = rng.uniform(-1.0, 1.0, size=(count, 3))
        points[:, 0] *= 0.5
        return points


# ---------------------------------------------------------------------------
# Structure constants
# ---------------------------------------------------------------------------

def bracket_deficiency(c: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of vertical directions no bracket reaches."""
    n, _, k = c.shape
    rows = [c[i, j, :] for i in range(n) for j in range(i + 1, n)]
    span = np.array(rows) if rows else np.zeros((1, k))
    return null_space(span)


def structure_constants_from_entries(entries: Sequence[Sequence[float]], n: int, m: int) -> np.ndarray:
    """Dense constants from sparse [i, j, k, value] entries; c[j, i, k] = -value is implied."""
    c = np.zeros((n, n, m - n))
    for entry in entries:
        i, j, k = (int(v) for v in entry[:3])
        c[i, j, k] = float(entry[3])
        c[j, i, k] = -float(entry[3])
    return c


def heisenberg_constants() -> np.ndarray:
    c = np.zeros((2, 2, 1))
    c[0, 1, 0], c[1, 0, 0] = 1.0, -1.0
    return c


def quaternionic_constants() -> np.ndarray:
    """c[i, j, k] = <L_{u_k} e_i, e_j> for u = i, j, k (left quaternion multiplication)."""
    c = np.zeros((4, 4, 3))
    for k, unit in enumerate((UNIT_I, UNIT_J, UNIT_K)):
        c[:, :, k] = left_matrix(unit).T
    return c


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def heisenberg(bracket_mode: BracketMode = BracketMode.ANALYTIC) -> CarnotModel:
    """Heisenberg group: X = d_x - (y/2) d_z, Y = d_y + (x/2) d_z, V = d_z."""
    return CarnotModel(heisenberg_constants(), name="heisenberg", bracket_mode=bracket_mode)


def step2_carnot(
    c: np.ndarray,
    n: int,
    m: int,
    bracket_mode: BracketMode = BracketMode.ANALYTIC,
    name: str = "step2-carnot",
    require_bracket_generating: bool = True,
) -> CarnotModel:
    c = np.asarray(c, dtype=float)
    if c.shape != (n, n, m - n):
        raise ModelConstructionError(f"structure constants shape {c.shape} does not match n={n}, m={m}")
    return CarnotModel(c, name=name, bracket_mode=bracket_mode, require_bracket_generating=require_bracket_generating)


def product_heisenberg(bracket_mode: BracketMode = BracketMode.ANALYTIC) -> CarnotModel:
    """Two commuting Heisenberg blocks: [X, Y] = Z, [X^, Y^] = Z^."""
    c = np.zeros((4, 4, 2))
    c[0, 1, 0], c[1, 0, 0] = 1.0, -1.0
    c[2, 3, 1], c[3, 2, 1] = 1.0, -1.0
    return CarnotModel(c, name="product-heisenberg", bracket_mode=bracket_mode)


def quaternionic_htype(bracket_mode: BracketMode = BracketMode.ANALYTIC) -> CarnotModel:
    """Quaternionic H-type group, n = 4, m = 7."""
    return CarnotModel(quaternionic_constants(), name="quaternionic-htype", bracket_mode=bracket_mode)


def hopf(bracket_mode: BracketMode = BracketMode.ANALYTIC) -> HopfModel:
    return HopfModel(bracket_mode=bracket_mode)


def twisted_heisenberg(bracket_mode: BracketMode = BracketMode.ANALYTIC) -> TwistedHeisenbergModel:
    return TwistedHeisenbergModel(bracket_mode=bracket_mode)


MODEL_REGISTRY: Dict[str, Callable[..., SubmersionModel]] = {
    "heisenberg": heisenberg,
    "product-heisenberg": product_heisenberg,
    "quaternionic-htype": quaternionic_htype,
    "hopf": hopf,
    "twisted-heisenberg": twisted_heisenberg,
}
MODEL_NAMES: Tuple[str, ...] = tuple(MODEL_REGISTRY)

MODEL_DESCRIPTIONS = {
    "heisenberg": "Heisenberg group over R^2 (n=2, m=3)",
    "product-heisenberg": "Heisenberg x Heisenberg over R^4 (n=4, m=6)",
    "quaternionic-htype": "quaternionic H-type group over R^4 (n=4, m=7)",
    "hopf": "Hopf fibration S^3 -> S^2(1/2) (n=2, m=3)",
    "twisted-heisenberg": "non-parallel curvature 1+x over R^2 (n=2, m=3)",
}


def get_model(name: str, bracket_mode: BracketMode = BracketMode.ANALYTIC) -> SubmersionModel:
    """Build a registered model by name."""
    key = name.lower().strip()
    if key not in MODEL_REGISTRY:
        raise InputError(f"Unknown model: {name}. Valid models: {list(MODEL_NAMES)}")
    return MODEL_REGISTRY[key](bracket_mode=bracket_mode)


# ---------------------------------------------------------------------------
# Invariant suite
# ---------------------------------------------------------------------------

def sample_points(model: SubmersionModel, count: int = 100, seed: int = MODEL_SEED) -> np.ndarray:
    return model.random_points(np.random.default_rng(seed), count)


def model_invariant_residuals(model: SubmersionModel, points: np.ndarray) -> np.ndarray:
    """Per-point residual: orthonormality of dpi(X_i), dpi(V_k) = 0 and frame independence."""
    points = model.validate_points(np.atleast_2d(points))
    e = base_frame(model, points)
    g = model.base_metric(model.projection(points))
    gram = np.einsum("...ib,...bc,...jc->...ij", e, g, e)
    ortho = np.max(np.abs(gram - np.eye(model.n)), axis=(-1, -2))

    vertical_images = np.einsum("...bc,...kc->...kb", model.projection_jacobian(points), model.vertical_frame(points))
    kernel = np.max(np.abs(vertical_images), axis=(-1, -2))

    singular = np.linalg.svd(model.frame(points), compute_uv=False)
    independent = singular[..., -1] > 1e-8 * np.maximum(singular[..., 0], 1.0)

    residual = np.maximum(ortho, kernel)
    return np.where(independent, residual, np.inf)


def validate_model(
    model: SubmersionModel,
    points: Optional[np.ndarray] = None,
    tolerance: float = 1e-10,
    count: int = 100,
) -> CheckReport:
    """Run the model invariant suite at the given (or seeded random) points."""
    if points is None:
        points = sample_points(model, count)
    points = np.atleast_2d(points)
    residuals = model_invariant_residuals(model, points)
    # the coframe must exist wherever the frame is independent
    coframe(model, points[np.isfinite(residuals)])
    witnesses: List[dict] = [{"point": p} for p in points]
    report = build_check_report("model-invariants", residuals, tolerance, witnesses)
    logger.info(f"Model '{model.name}' invariants: {'pass' if report.passed else 'FAIL'} "
                f"(max residual {report.max_residual:.3e})")
    return report
