"""srgeodesics Application Configuration.

Dataclasses for system settings (environment driven), numerical tolerances and
experiment definitions loaded from YAML config files.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

from src.config.check_config import CheckName, ToleranceKind
from src.exceptions import ConfigError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0x5EED


@dataclass
class SystemConfig:
    """Process-wide settings."""
    output_dir: str = field(default_factory=lambda: os.getenv("SRGEO_OUTPUT_DIR", "./results"))
    log_level: str = field(default_factory=lambda: os.getenv("SRGEO_LOG_LEVEL", "INFO"))
    workers: int = field(default_factory=lambda: int(os.getenv("SRGEO_WORKERS", "1")))

    def __post_init__(self) -> None:
        self.log_level = self.log_level.upper()
        if self.log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"Unknown log level: {self.log_level}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass
class ToleranceConfig:
    """Tolerances each check is judged against."""
    algebraic: float = 1e-10
    numeric: float = 1e-5
    kappa_constant: float = 1e-6  # relative std of kappa1
    kappa_vanish: float = 1e-5    # absolute
    route: float = 1e-6
    energy: float = 1e-9

    def __post_init__(self) -> None:
        for name, value in self.to_dict().items():
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"tolerance '{name}' must be a positive number, got {value!r}")

    def with_overrides(self, overrides: Optional[Dict[str, Any]]) -> "ToleranceConfig":
        """Return a copy with the given fields replaced."""
        if not overrides:
            return ToleranceConfig(**self.to_dict())
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ConfigError(
                f"Unknown tolerance keys: {sorted(unknown)}. "
                f"Valid keys: {sorted(self.__dataclass_fields__)}"
            )
        merged = self.to_dict()
        merged.update({k: float(v) for k, v in overrides.items()})
        return ToleranceConfig(**merged)

    def for_check(self, check: CheckName) -> Optional[float]:
        """Tolerance for a check, or None when the check carries its own threshold."""
        kind = check.tolerance_kind
        if kind == ToleranceKind.FIXED:
            return None
        return getattr(self, kind.value)

    def to_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


@dataclass
class ExperimentConfig:
    """One experiment section of a config file.

    Attributes:
        name: section name, used for the output subdirectory
        model: registry name of a built-in model
        structure_constants: sparse [i, j, k, value] entries of a step-2 Carnot
            model (zero-based indices, antisymmetric partners are implied)
        n, m: dimensions for inline structure constants
        initial_conditions: list of {x0, lambda0} or {x0, alpha, v} mappings
        random_ics: number of seeded random (x0, alpha, v) initial conditions
        T, h: integration horizon and step
        checks: check names to run
        tolerances: overrides for ToleranceConfig fields
        output_dir: output directory (overridden by env and --out)
        seed: seed for all random draws
        probes: random probes per check
        normalize: rescale initial covectors to unit horizontal speed
    """
    name: str = "experiment"
    model: Optional[str] = None
    structure_constants: Optional[List[List[float]]] = None
    n: Optional[int] = None
    m: Optional[int] = None
    initial_conditions: List[Dict[str, Any]] = field(default_factory=list)
    random_ics: int = 0
    T: float = 5.0
    h: float = 1e-3
    checks: List[str] = field(default_factory=list)
    tolerances: Dict[str, float] = field(default_factory=dict)
    output_dir: Optional[str] = None
    seed: int = DEFAULT_SEED
    probes: int = 50
    normalize: bool = True

    def __post_init__(self) -> None:
        """Validate the section."""
        try:
            self.T = float(self.T)
            self.h = float(self.h)
            self.seed = int(self.seed)
            self.probes = int(self.probes)
            self.random_ics = int(self.random_ics)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{self.name}] non-numeric T/h/seed/probes/random_ics: {e}") from e

        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigError(f"[{self.name}] T must be > 0, got {self.T}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ConfigError(f"[{self.name}] h must be > 0, got {self.h}")
        if self.h >= self.T:
            raise ConfigError(f"[{self.name}] h must be < T, got h={self.h}, T={self.T}")
        if self.probes < 1:
            raise ConfigError(f"[{self.name}] probes must be >= 1, got {self.probes}")
        if self.random_ics < 0:
            raise ConfigError(f"[{self.name}] random_ics must be >= 0, got {self.random_ics}")

        if (self.model is None) == (self.structure_constants is None):
            raise ConfigError(
                f"[{self.name}] exactly one of 'model' or 'structure_constants' is required"
            )
        if self.model is not None:
            from src.models import MODEL_NAMES

            if self.model not in MODEL_NAMES:
                raise ConfigError(
                    f"[{self.name}] unknown model '{self.model}'. Valid models: {list(MODEL_NAMES)}"
                )
        else:
            self._validate_structure_constants()

        try:
            self.checks = [CheckName.from_string(str(c)).value for c in self.checks]
        except ValueError as e:
            raise ConfigError(f"[{self.name}] {e}") from e

        for index, ic in enumerate(self.initial_conditions):
            if not isinstance(ic, dict) or "x0" not in ic:
                raise ConfigError(f"[{self.name}] initial_conditions[{index}] needs an 'x0' entry")
            has_covector = "lambda0" in ic
            has_pair = "alpha" in ic and "v" in ic
            if has_covector == has_pair:
                raise ConfigError(
                    f"[{self.name}] initial_conditions[{index}] needs either 'lambda0' "
                    f"or both 'alpha' and 'v'"
                )

        if not self.initial_conditions and self.random_ics == 0:
            self.random_ics = 10

        # surfaces unknown keys early
        self.tolerance_config()

    def _validate_structure_constants(self) -> None:
        if self.n is None or self.m is None:
            raise ConfigError(f"[{self.name}] inline structure_constants need 'n' and 'm'")
        self.n, self.m = int(self.n), int(self.m)
        if not self.m > self.n >= 2:
            raise ConfigError(f"[{self.name}] need m > n >= 2, got n={self.n}, m={self.m}")
        for entry in self.structure_constants or []:
            if not isinstance(entry, (list, tuple)) or len(entry) != 4:
                raise ConfigError(
                    f"[{self.name}] structure constant entries are [i, j, k, value], got {entry!r}"
                )
            i, j, k = (int(v) for v in entry[:3])
            if not (0 <= i < self.n and 0 <= j < self.n and 0 <= k < self.m - self.n):
                raise ConfigError(f"[{self.name}] structure constant index out of range: {entry!r}")
            if i == j:
                raise ConfigError(f"[{self.name}] structure constant with i == j: {entry!r}")

    def tolerance_config(self) -> ToleranceConfig:
        return ToleranceConfig().with_overrides(self.tolerances)

    def resolve_output_dir(self, cli_out: Optional[str] = None) -> Path:
        """--out flag > SRGEO_OUTPUT_DIR > config value > default."""
        env_dir = os.getenv("SRGEO_OUTPUT_DIR")
        base = cli_out or env_dir or self.output_dir or SystemConfig().output_dir
        return Path(base) / self.name

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, name: str, data: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"Section '{name}' must be a mapping, got {type(data).__name__}")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"[{name}] unknown keys: {sorted(unknown)}")
        data = {k: v for k, v in data.items() if k in cls.__dataclass_fields__ and k != "name"}
        return cls(name=name, **data)


def load_experiments(config_path: str) -> List[ExperimentConfig]:
    """Load every experiment section of a YAML config file.

    Args:
        config_path: Path to the YAML file

    Returns:
        ExperimentConfig per top-level section, in file order

    Raises:
        ConfigError: missing file, invalid YAML or invalid section
    """
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {config_path}: {e}") from e

    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"{config_path} must contain at least one experiment section")

    experiments = [ExperimentConfig.from_dict(str(name), section) for name, section in raw.items()]
    logger.info(f"Loaded {len(experiments)} experiment(s) from {config_path}")
    return experiments
