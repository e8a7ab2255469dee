import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dynwave.grid import Grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid200():
    return Grid(200)


@pytest.fixture
def sin1():
    return lambda x: np.sin(np.pi * x)
