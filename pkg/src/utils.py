#!/usr/bin/env python3
"""
Utility Functions
=================
Small helpers shared by the runner and the CLI.
"""

from typing import Iterable, Union

import numpy as np


def format_duration(seconds: float) -> str:
    """
    Convert seconds to human-readable duration.

    Args:
        seconds: Duration in seconds

    Returns:
        Human-readable string like "0.25s", "1m 30s", "2h 15m"
    """
    if seconds < 1:
        return f"{seconds:.2f}s"
    if seconds < 60:
        return f"{seconds:.1f}s"
    if seconds < 3600:
        return f"{int(seconds // 60)}m {int(seconds % 60)}s"
    return f"{int(seconds // 3600)}h {int((seconds % 3600) // 60)}m"


def format_residual(value: float) -> str:
    """Scientific notation for residuals; 'inf' and 'nan' pass through."""
    value = float(value)
    if not np.isfinite(value):
        return str(value)
    return f"{value:.3e}"


def derived_rng(seed: int, *keys: Union[int, Iterable[int]]) -> np.random.Generator:
    """Generator seeded from (seed, *keys); independent streams per key tuple."""
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, (int, np.integer)):
            entropy.append(int(key))
        else:
            entropy.extend(int(k) for k in key)
    return np.random.default_rng(entropy)
