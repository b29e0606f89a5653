"""Quaternion helpers on arrays of shape (..., 4) ordered (w, x, y, z)."""

from __future__ import annotations

import numpy as np

UNIT_I = np.array([0.0, 1.0, 0.0, 0.0])
UNIT_J = np.array([0.0, 0.0, 1.0, 0.0])
UNIT_K = np.array([0.0, 0.0, 0.0, 1.0])


def quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product p*q, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def right_matrix(u: np.ndarray) -> np.ndarray:
    """4x4 matrix of q -> q*u."""
    return np.stack([quat_mul(e, u) for e in np.eye(4)], axis=-1)


def left_matrix(u: np.ndarray) -> np.ndarray:
    """4x4 matrix of q -> u*q."""
    return np.stack([quat_mul(u, e) for e in np.eye(4)], axis=-1)


def random_unit_quaternions(rng: np.random.Generator, count: int) -> np.ndarray:
    q = rng.normal(size=(count, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)
