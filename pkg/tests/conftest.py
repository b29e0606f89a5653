"""Shared pytest fixtures for the srgeodesics test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.models import MODEL_NAMES, get_model  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=MODEL_NAMES)
def any_model(request):
    """Every registered model."""
    return get_model(request.param)


@pytest.fixture
def heisenberg_model():
    return get_model("heisenberg")


@pytest.fixture
def hopf_model():
    return get_model("hopf")


@pytest.fixture
def product_model():
    return get_model("product-heisenberg")


@pytest.fixture
def quaternionic_model():
    return get_model("quaternionic-htype")


@pytest.fixture
def twisted_model():
    return get_model("twisted-heisenberg")
