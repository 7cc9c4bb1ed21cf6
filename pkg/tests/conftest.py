import numpy as np
import pytest

from berkson.function_class import MarginParams, make_power


@pytest.fixture
def step():
    """k = 1 step with c = 1/4, sigma = 0.1, threshold at 0."""
    return make_power(MarginParams(k=1, c=0.25, sigma=0.1), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
