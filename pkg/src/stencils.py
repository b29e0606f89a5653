"""Fourth-order finite-difference stencils on uniform grids (one-sided at the ends)."""

from __future__ import annotations

import numpy as np

from src.exceptions import InputError

_D1_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D1_FIRST = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_D1_SECOND = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0

_D2_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D2_FIRST = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0
_D2_SECOND = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0


def _apply(values: np.ndarray, central, first, second, sign: float, width: int) -> np.ndarray:
    f = np.asarray(values, dtype=float)
    count = f.shape[0]
    if count < width:
        raise InputError(f"need at least {width} samples for fourth-order stencils, got {count}")
    out = np.empty_like(f)
    out[2:-2] = sum(c * f[k : count - 4 + k] for k, c in enumerate(central))
    out[0] = sum(c * f[k] for k, c in enumerate(first))
    out[1] = sum(c * f[k] for k, c in enumerate(second))
    out[-1] = sign * sum(c * f[-1 - k] for k, c in enumerate(first))
    out[-2] = sign * sum(c * f[-1 - k] for k, c in enumerate(second))
    return out


def first_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """d/dt along axis 0."""
    return _apply(values, _D1_CENTRAL, _D1_FIRST, _D1_SECOND, -1.0, 5) / h


def second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """d^2/dt^2 along axis 0."""
    return _apply(values, _D2_CENTRAL, _D2_FIRST, _D2_SECOND, 1.0, 6) / (h * h)


def first_derivative_windows(count: int) -> np.ndarray:
    """Sample indices each first-derivative output depends on, shape (count, 5)."""
    index = np.arange(count)
    starts = np.clip(index - 2, 0, count - 5)
    return starts[:, None] + np.arange(5)


def touches_undefined(undefined: np.ndarray) -> np.ndarray:
    """Samples whose first-derivative stencil reads an undefined sample."""
    undefined = np.asarray(undefined, dtype=bool)
    return undefined[first_derivative_windows(undefined.size)].any(axis=1)
