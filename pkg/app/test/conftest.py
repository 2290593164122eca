import os
import sys

import numpy as np
import pytest

# Add app to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from app.models.schema import GridSpec, KernelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def cubic():
    return KernelSpec(gamma=3.0)


@pytest.fixture
def quadratic():
    return KernelSpec(gamma=2.0)


@pytest.fixture
def line4():
    return GridSpec(n=(4,))


@pytest.fixture
def square2():
    return GridSpec(n=(2, 2))
