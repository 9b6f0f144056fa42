import numpy as np
import pytest

from ptwell.model import SystemParams
from ptwell.nonlinear import classify_states, discover_states


@pytest.fixture(scope="session")
def census_u1():
    """States and labels at (J=1, gamma=0.1, U=1)."""
    params = SystemParams(1.0, 0.1, 1.0)
    states = discover_states(params)
    return states, classify_states(params, states)


@pytest.fixture(scope="session")
def census_u4():
    params = SystemParams(1.0, 0.1, 4.0)
    states = discover_states(params)
    return states, classify_states(params, states)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
