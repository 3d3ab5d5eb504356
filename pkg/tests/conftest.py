import numpy as np
import pytest

from modscatter.config import SimConfig
from modscatter.evolution import evolve


SMALL_NLS = SimConfig(equation="nls1d", points_per_dim=2048, box_length=520.0,
                      t_end=32.0, dt=5e-3, eps=0.5)

SMALL_HARTREE = SimConfig(equation="hartree2d", points_per_dim=128, box_length=128.0,
                          t_end=24.0, dt=1e-2, eps=0.004, initial_width=4.5)


@pytest.fixture(scope="session")
def small_series():
    """Short nls1d production-style run shared by the diagnostics tests."""
    return evolve(SMALL_NLS)


@pytest.fixture(scope="session")
def small_linear_series():
    """Same configuration with the nonlinearity switched off (free flow)."""
    return evolve(SMALL_NLS, linear_only=True)


@pytest.fixture(scope="session")
def small_hartree_series():
    return evolve(SMALL_HARTREE)
