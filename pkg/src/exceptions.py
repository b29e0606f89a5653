"""
Exception hierarchy for srgeodesics.

Every error raised by the library derives from SRGeodesicsError so the CLI can
map families of failures to exit codes:

- InputError / ConfigError  -> exit 2
- failed checks             -> exit 1
- NumericalError (incl. DivergenceError) -> exit 3
"""

from __future__ import annotations

from typing import Optional, Sequence


class SRGeodesicsError(RuntimeError):
    """Base class for all library errors."""


class InputError(SRGeodesicsError, ValueError):
    """Raised when caller-supplied data violates an operation's preconditions."""


class ConfigError(SRGeodesicsError, ValueError):
    """Raised when an experiment configuration cannot be parsed or validated."""


class GeometryError(SRGeodesicsError):
    """Raised on degenerate frames, points outside a chart or degenerate metrics."""


class ModelConstructionError(GeometryError):
    """Raised when structure constants do not define a valid model.

    Attributes:
        deficient_directions: vertical directions (as coefficient vectors) that
            no bracket of horizontal fields reaches.
    """

    def __init__(self, message: str, deficient_directions: Optional[Sequence] = None) -> None:
        super().__init__(message)
        self.deficient_directions = [] if deficient_directions is None else list(deficient_directions)


class NumericalError(SRGeodesicsError):
    """Raised when a finite-difference or transport computation breaks down."""


class DivergenceError(NumericalError):
    """Raised when an integrator blows up. Carries the last finite time."""

    def __init__(self, message: str, last_good_time: float) -> None:
        super().__init__(f"{message} (last good time t={last_good_time:.6g})")
        self.last_good_time = last_good_time
