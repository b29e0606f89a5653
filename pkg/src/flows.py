#!/usr/bin/env python3
"""
Flows
=====
Fixed-step RK4 integration of:

- normal sub-Riemannian geodesics (Hamilton's equations of H = 1/2 sum lam(X_i)^2)
- geodesics of the base N, horizontal lifts of base curves
- Levi-Civita transport on N and annihilator (black-triangle) transport on M
- geodesics of an extended Riemannian cometric on M
- a joint "lifted geodesic" system integrating a base geodesic, its lift and
  both transports together, used by the curvature-derivative and theorem checks

All integrators run batches of initial conditions at once; a divergence
(non-finite values or norm above 1e12) raises DivergenceError carrying the
last good time. Curves given as samples are interpolated with cubic Hermite
splines at the RK4 half steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from src.exceptions import DivergenceError, GeometryError, InputError
from src.geometry_core import (
    AnnihilatorCovector,
    AnnihilatorLike,
    PhaseState,
    SubmersionModel,
    as_chart_array,
    base_coefficients,
    base_vector,
    coframe,
    frame_jacobians,
    hamiltonian_energy_at,
    horizontal_lift_vector,
    horizontal_pairings,
    horizontal_vector,
    vertical_action,
)
from src.stencils import first_derivative

logger = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e12
BASE_POINT_TOL = 1e-8
HORIZONTAL_TOL = 1e-6
POSITIVITY_FLOOR = 1e-10
ZERO_SPEED = 1e-14


@dataclass
class Trajectory:
    """Uniformly sampled curve.

    Attributes:
        times: (N,) grid on [0, T]
        points: (N, dim) samples of the curve (points of M, or of N for base curves)
        covectors: (N, dim) extremal covectors for phase trajectories
        velocities: (N, dim) tangent vectors of `points`
        step_size: grid spacing (0 for a single sample)
        normalized: initial data was rescaled to unit horizontal speed
        kind: "normal", "extended", "lift" or "base"
    """
    times: np.ndarray
    points: np.ndarray
    covectors: Optional[np.ndarray] = None
    velocities: Optional[np.ndarray] = None
    step_size: float = 0.0
    normalized: bool = False
    kind: str = "normal"

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def state(self, index: int) -> PhaseState:
        if self.covectors is None:
            raise InputError(f"{self.kind} trajectory carries no covectors")
        return PhaseState(self.points[index], self.covectors[index], self.normalized)


@dataclass
class LiftedGeodesics:
    """Output of `integrate_lifted_geodesics`; axis 1 indexes the batch."""
    times: np.ndarray
    base_points: np.ndarray
    base_velocities: np.ndarray
    lift_points: np.ndarray
    annihilators: np.ndarray
    base_vectors: np.ndarray
    step_size: float = 0.0


class CometricLike(Protocol):
    """What the extended-geodesic integrator needs from a Riemannian cometric on M."""

    def hamiltonian(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray: ...

    def hamiltonian_gradient(self, x: np.ndarray, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]: ...

    def min_eigenvalue(self, x: np.ndarray) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# RK4 core
# ---------------------------------------------------------------------------

def time_grid(T: float, h: float) -> np.ndarray:
    """Uniform grid with ceil(T/h) steps of size T/steps."""
    if not (np.isfinite(T) and T >= 0):
        raise InputError(f"duration T must be finite and >= 0, got {T}")
    if not (np.isfinite(h) and h > 0):
        raise InputError(f"step h must be finite and > 0, got {h}")
    steps = int(np.ceil(T / h - 1e-9)) if T > 0 else 0
    return np.linspace(0.0, T, steps + 1)


def rk4_on_grid(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    times: np.ndarray,
    label: str = "flow",
    norm_limit: float = DIVERGENCE_NORM,
) -> np.ndarray:
    """Classical RK4 over a given grid; returns samples of shape (len(times),) + y0.shape."""
    y = np.array(y0, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(len(times) - 1):
            t = float(times[s])
            dt = float(times[s + 1] - times[s])
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > norm_limit:
                logger.error(f"{label} diverged after t={t:.6g}")
                raise DivergenceError(f"{label} diverged", last_good_time=t)
            out[s + 1] = y
    return out


def _step_of(times: np.ndarray) -> float:
    return float(times[1] - times[0]) if len(times) > 1 else 0.0


def require_uniform_grid(times: np.ndarray) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InputError("trajectory needs a non-empty 1-D time grid")
    if times.size == 1:
        return 0.0
    steps = np.diff(times)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise InputError("trajectory time grid must be uniform and increasing")
    return float(steps[0])


def _curve_spline(times: np.ndarray, points: np.ndarray, velocities: Optional[np.ndarray]) -> CubicHermiteSpline:
    step = require_uniform_grid(times)
    if velocities is None:
        if len(times) >= 5:
            velocities = first_derivative(points, step)
        else:
            velocities = np.gradient(points, times, axis=0)
    return CubicHermiteSpline(times, points, velocities, axis=0)


# ---------------------------------------------------------------------------
# Normal geodesics
# ---------------------------------------------------------------------------

def _normal_rhs(model: SubmersionModel) -> Callable[[float, np.ndarray], np.ndarray]:
    d, n = model.chart_dim, model.n

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        x, lam = z[..., :d], z[..., d:]
        xh = model.frame(x)[..., :n, :]
        jac = frame_jacobians(model, x)[..., :n, :, :]
        u = np.einsum("...id,...d->...i", xh, lam)
        xdot = np.einsum("...i,...id->...d", u, xh)
        lamdot = -np.einsum("...i,...icd,...c->...d", u, jac, lam)
        return np.concatenate([xdot, lamdot], axis=-1)

    return rhs


def normalize_covectors(model: SubmersionModel, x: np.ndarray, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Rescale covectors to unit horizontal speed; annihilators are left untouched."""
    speed = np.linalg.norm(horizontal_pairings(model, x, lam), axis=-1)
    scaled = speed > ZERO_SPEED
    factor = np.where(scaled, 1.0 / np.where(scaled, speed, 1.0), 1.0)
    return lam * factor[..., None], scaled


def integrate_normal_geodesics(
    model: SubmersionModel,
    x0: np.ndarray,
    lam0: np.ndarray,
    T: float,
    h: float,
    normalize: bool = True,
) -> List[Trajectory]:
    """Integrate a batch of normal geodesics from rows of (x0, lam0)."""
    x0 = np.atleast_2d(model.validate_points(x0))
    lam0 = np.atleast_2d(as_chart_array(lam0, model.chart_dim, "covector"))
    if x0.shape != lam0.shape:
        raise InputError(f"x0 and lam0 batches differ: {x0.shape} vs {lam0.shape}")
    flags = np.zeros(len(x0), dtype=bool)
    if normalize:
        lam0, flags = normalize_covectors(model, x0, lam0)

    times = time_grid(T, h)
    d = model.chart_dim
    logger.debug(f"Integrating {len(x0)} normal geodesic(s) on '{model.name}', {len(times) - 1} steps")
    z = rk4_on_grid(_normal_rhs(model), np.concatenate([x0, lam0], axis=-1), times, "normal geodesic")
    points, covectors = z[..., :d], z[..., d:]

    xh = model.frame(points)[..., : model.n, :]
    u = np.einsum("...id,...d->...i", xh, covectors)
    velocities = np.einsum("...i,...id->...d", u, xh)
    energy = 0.5 * np.sum(u * u, axis=-1)
    logger.debug(f"max energy drift {np.max(np.abs(energy - energy[0])):.3e}")

    step = _step_of(times)
    return [
        Trajectory(times, points[:, b], covectors[:, b], velocities[:, b], step, bool(flags[b]), "normal")
        for b in range(len(x0))
    ]


def integrate_normal_geodesic(
    model: SubmersionModel, state0: PhaseState, T: float, h: float, normalize: bool = True
) -> Trajectory:
    """Normal geodesic from one phase state."""
    return integrate_normal_geodesics(model, state0.x, state0.lam, T, h, normalize)[0]


def energy_drift(model: SubmersionModel, traj: Trajectory, cometric: Optional[CometricLike] = None) -> float:
    """max_t |H(t) - H(0)| for the sub-Riemannian (or given extended) Hamiltonian."""
    if traj.covectors is None:
        raise InputError("energy drift needs a phase trajectory")
    if cometric is None:
        energy = hamiltonian_energy_at(model, traj.points, traj.covectors)
    else:
        energy = cometric.hamiltonian(traj.points, traj.covectors)
    return float(np.max(np.abs(energy - energy[0])))


def project_trajectory(model: SubmersionModel, traj: Trajectory) -> Trajectory:
    """Base curve pi(gamma) with velocities dpi(gamma')."""
    velocities = traj.velocities
    if velocities is None:
        velocities = _curve_spline(traj.times, traj.points, None).derivative()(traj.times)
    base_points = model.projection(traj.points)
    base_velocities = np.einsum("...bc,...c->...b", model.projection_jacobian(traj.points), velocities)
    return Trajectory(traj.times, base_points, None, base_velocities, traj.step_size, traj.normalized, "base")


# ---------------------------------------------------------------------------
# Base geodesics, lifts, transports
# ---------------------------------------------------------------------------

def _christoffel_contract(gamma: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gamma^k_ij u^i w^j, with w allowed to carry an extra field axis."""
    if w.ndim == u.ndim:
        return np.einsum("...kij,...i,...j->...k", gamma, u, w)
    return np.einsum("...kij,...i,...pj->...pk", gamma, u, w)


def integrate_base_geodesics(model: SubmersionModel, y0: np.ndarray, v0: np.ndarray, T: float, h: float) -> List[Trajectory]:
    y0 = np.atleast_2d(model.validate_base_points(y0))
    v0 = np.atleast_2d(as_chart_array(v0, model.base_chart_dim, "base velocity"))
    speed = np.sqrt(np.einsum("...i,...ij,...j->...", v0, model.base_metric(y0), v0))
    if np.any(speed <= 0):
        raise InputError("base geodesic needs a non-zero initial velocity")
    bd = model.base_chart_dim

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        y, yd = z[..., :bd], z[..., bd:]
        return np.concatenate([yd, -_christoffel_contract(model.base_christoffels(y), yd, yd)], axis=-1)

    times = time_grid(T, h)
    z = rk4_on_grid(rhs, np.concatenate([y0, v0], axis=-1), times, "base geodesic")
    step = _step_of(times)
    return [
        Trajectory(times, z[:, b, :bd], None, z[:, b, bd:], step, bool(abs(speed[b] - 1.0) < 1e-12), "base")
        for b in range(len(y0))
    ]


def riemann_geodesic_base(model: SubmersionModel, y0: np.ndarray, v0: np.ndarray, T: float, h: float) -> Trajectory:
    """Geodesic of (N, g_N) from y0 with velocity v0."""
    return integrate_base_geodesics(model, y0, v0, T, h)[0]


def horizontal_lift(model: SubmersionModel, eta: Trajectory, x0: np.ndarray) -> Trajectory:
    """Horizontal lift of a sampled base curve starting at x0 over eta(0).

    Raises:
        InputError: pi(x0) differs from eta(0) by more than 1e-8.
    """
    x0 = model.validate_points(x0)
    mismatch = float(np.max(np.abs(model.projection(x0) - eta.points[0])))
    if mismatch > BASE_POINT_TOL:
        raise InputError(f"pi(x0) is {mismatch:.3e} away from the start of the base curve")
    spline = _curve_spline(eta.times, eta.points, eta.velocities)
    velocity = spline.derivative()

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        return horizontal_lift_vector(model, x, velocity(t))

    points = rk4_on_grid(rhs, x0, eta.times, "horizontal lift")
    velocities = horizontal_lift_vector(model, points, velocity(eta.times))
    return Trajectory(eta.times, points, None, velocities, _step_of(eta.times), eta.normalized, "lift")


def parallel_transport_base(model: SubmersionModel, eta: Trajectory, X0: np.ndarray) -> np.ndarray:
    """Levi-Civita transport of X0 (one vector, or a stack of vectors) along eta.

    Returns samples of shape (N,) + X0.shape.
    """
    X0 = as_chart_array(X0, model.base_chart_dim, "base vector")
    spline = _curve_spline(eta.times, eta.points, eta.velocities)
    velocity = spline.derivative()

    def rhs(t: float, X: np.ndarray) -> np.ndarray:
        return -_christoffel_contract(model.base_christoffels(spline(t)), velocity(t), X)

    return rk4_on_grid(rhs, X0, eta.times, "parallel transport")


def _curve_velocities(model: SubmersionModel, gamma: Trajectory) -> np.ndarray:
    if gamma.velocities is not None:
        return gamma.velocities
    return _curve_spline(gamma.times, gamma.points, None).derivative()(gamma.times)


def black_triangle_transport(model: SubmersionModel, gamma: Trajectory, beta0: AnnihilatorLike) -> np.ndarray:
    """Transport of an annihilator covector along a horizontal curve on M.

    Solves b_k' = sum_l b_l theta_{n+l}([gamma'_h, V_k]); the result stays in
    Ann(D) by construction. Returns vertical coefficients of shape (N, m - n).

    Raises:
        InputError: gamma has a vertical velocity component above 1e-6.
    """
    velocities = _curve_velocities(model, gamma)
    vertical = np.einsum("...kd,...d->...k", coframe(model, gamma.points)[..., model.n :, :], velocities)
    worst = float(np.max(np.abs(vertical))) if vertical.size else 0.0
    if worst > HORIZONTAL_TOL:
        raise InputError(f"curve is not horizontal (vertical velocity component {worst:.3e})")

    if isinstance(beta0, AnnihilatorCovector):
        b0 = beta0.coefficients
    else:
        b0 = AnnihilatorCovector.from_chart(model, gamma.points[0], beta0).coefficients
    if b0.shape != (model.vertical_dim,):
        raise InputError(f"annihilator needs {model.vertical_dim} coefficients, got {b0.shape}")

    spline = CubicHermiteSpline(gamma.times, gamma.points, velocities, axis=0) if len(gamma) > 1 else None
    if spline is None:
        return b0[None, :].copy()
    velocity = spline.derivative()
    n = model.n

    def rhs(t: float, b: np.ndarray) -> np.ndarray:
        x = spline(t)
        a = np.einsum("id,d->i", coframe(model, x)[:n, :], velocity(t))
        return np.einsum("i,l,ilk->k", a, b, vertical_action(model, x))

    return rk4_on_grid(rhs, b0, gamma.times, "annihilator transport")


# ---------------------------------------------------------------------------
# Joint lifted-geodesic system
# ---------------------------------------------------------------------------

def integrate_lifted_geodesics(
    model: SubmersionModel,
    x0: np.ndarray,
    a0: np.ndarray,
    T: float,
    h: float,
    annihilators: Optional[np.ndarray] = None,
    base_vectors: Optional[np.ndarray] = None,
) -> LiftedGeodesics:
    """Base geodesics from pi(x0) with velocity sum a0_i e_i, their horizontal
    lifts through x0, annihilator transport of `annihilators` (B, K, m-n) along
    the lifts and Levi-Civita transport of `base_vectors` (B, L, base_chart_dim).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    a0 = np.atleast_2d(np.asarray(a0, dtype=float))
    batch = x0.shape[0]
    k, bd, d = model.vertical_dim, model.base_chart_dim, model.chart_dim
    if annihilators is None:
        annihilators = np.zeros((batch, 0, k))
    if base_vectors is None:
        base_vectors = np.zeros((batch, 0, bd))
    annihilators = np.asarray(annihilators, dtype=float)
    base_vectors = np.asarray(base_vectors, dtype=float)
    n_ann, n_vec = annihilators.shape[1], base_vectors.shape[1]

    sizes = [bd, bd, d, n_ann * k, n_vec * bd]
    offsets = np.cumsum([0] + sizes)

    def unpack(z: np.ndarray):
        parts = [z[..., offsets[i] : offsets[i + 1]] for i in range(len(sizes))]
        y, yd, x, b, w = parts
        return y, yd, x, b.reshape(z.shape[:-1] + (n_ann, k)), w.reshape(z.shape[:-1] + (n_vec, bd))

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        y, yd, x, b, w = unpack(z)
        gamma = model.base_christoffels(y)
        a = base_coefficients(model, x, yd)
        db = np.einsum("...i,...pl,...ilk->...pk", a, b, vertical_action(model, x)) if n_ann else b
        dw = -_christoffel_contract(gamma, yd, w) if n_vec else w
        return np.concatenate(
            [
                yd,
                -_christoffel_contract(gamma, yd, yd),
                horizontal_vector(model, x, a),
                db.reshape(z.shape[:-1] + (n_ann * k,)),
                dw.reshape(z.shape[:-1] + (n_vec * bd,)),
            ],
            axis=-1,
        )

    y0 = model.projection(x0)
    v0 = base_vector(model, x0, a0)
    z0 = np.concatenate(
        [y0, v0, x0, annihilators.reshape(batch, n_ann * k), base_vectors.reshape(batch, n_vec * bd)], axis=-1
    )
    times = time_grid(T, h)
    z = rk4_on_grid(rhs, z0, times, "lifted geodesic")
    y, yd, x, b, w = unpack(z)
    return LiftedGeodesics(times, y, yd, x, b, w, _step_of(times))


# ---------------------------------------------------------------------------
# Extended-metric geodesics
# ---------------------------------------------------------------------------

def _require_positive(cometric: CometricLike, x: np.ndarray, where: str) -> None:
    smallest = float(np.min(cometric.min_eigenvalue(x)))
    if smallest <= POSITIVITY_FLOOR:
        raise GeometryError(f"extended cometric is degenerate {where} (min eigenvalue {smallest:.3e})")


def integrate_extended_geodesics(
    model: SubmersionModel,
    cometric: CometricLike,
    x0: np.ndarray,
    lam0: np.ndarray,
    T: float,
    h: float,
    normalize: bool = False,
) -> List[Trajectory]:
    """Geodesics of the Riemannian cometric as the Hamiltonian flow of 1/2 lam^T g*_M lam."""
    x0 = np.atleast_2d(model.validate_points(x0))
    lam0 = np.atleast_2d(as_chart_array(lam0, model.chart_dim, "covector"))
    flags = np.zeros(len(x0), dtype=bool)
    if normalize:
        lam0, flags = normalize_covectors(model, x0, lam0)
    _require_positive(cometric, x0, "at the initial point")
    d = model.chart_dim

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        dhdx, dhdlam = cometric.hamiltonian_gradient(z[..., :d], z[..., d:])
        return np.concatenate([dhdlam, -dhdx], axis=-1)

    times = time_grid(T, h)
    z = rk4_on_grid(rhs, np.concatenate([x0, lam0], axis=-1), times, "extended geodesic")
    points, covectors = z[..., :d], z[..., d:]
    _require_positive(cometric, points, "along the flow")
    velocities = cometric.hamiltonian_gradient(points, covectors)[1]
    step = _step_of(times)
    return [
        Trajectory(times, points[:, b], covectors[:, b], velocities[:, b], step, bool(flags[b]), "extended")
        for b in range(len(x0))
    ]


def integrate_extended_geodesic(
    model: SubmersionModel, cometric: CometricLike, state0: PhaseState, T: float, h: float, normalize: bool = False
) -> Trajectory:
    return integrate_extended_geodesics(model, cometric, state0.x, state0.lam, T, h, normalize)[0]
