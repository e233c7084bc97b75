"""Shared pytest fixtures for alekahler tests."""

import numpy as np
import pytest
from pathlib import Path

from alekahler.radial_field import RadialGrid

# Path to fixtures directory
FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    """Return path to fixtures directory."""
    return FIXTURES_DIR


@pytest.fixture
def calabi_job(fixtures_dir) -> Path:
    """Return path to a single calabi job config."""
    return fixtures_dir / "calabi_m2.json"


@pytest.fixture
def batch_job(fixtures_dir) -> Path:
    """Return path to a three-job batch config."""
    return fixtures_dir / "batch.json"


@pytest.fixture
def bad_job(fixtures_dir) -> Path:
    """Return path to a calabi config missing its dimension."""
    return fixtures_dir / "bad_config.json"


@pytest.fixture
def source_csv(fixtures_dir) -> Path:
    """Return path to (r, f) samples of 8 (1 + r^2)^-3."""
    return fixtures_dir / "source_samples.csv"


@pytest.fixture
def poisson_grid() -> RadialGrid:
    """Log-r grid on which the Poisson oracles hold to 1e-8."""
    return RadialGrid.log_r(1e-4, 1e6, 8001)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for randomized sweeps."""
    return np.random.default_rng(20240601)
