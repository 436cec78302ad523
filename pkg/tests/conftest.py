import numpy as np
import pytest

from granflow.core import GasParams
from granflow.exact import SteadyParams


@pytest.fixture
def gas():
    return GasParams(5.0 / 3.0, 1.0)


@pytest.fixture
def steady(gas):
    # k = c2 = 1, branch starting at x_plus = 1 with z(1) = 0.3 (z* = 0.6)
    return SteadyParams.through(1.0, 1.0, gas, 1.0, 0.3)


@pytest.fixture
def traveling(gas):
    return SteadyParams.through(1.0, 1.0, gas, -0.6, 0.3, a=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
