"""srgeodesics configuration package."""

from src.config.app_config import (  # noqa: F401
    DEFAULT_SEED,
    ExperimentConfig,
    SystemConfig,
    ToleranceConfig,
    load_experiments,
)
from src.config.check_config import CheckName, ToleranceKind  # noqa: F401
