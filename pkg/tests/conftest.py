import numpy as np
import pytest

from dragekf.sensors import NoiseConfig


@pytest.fixture
def zero_noise():
    return NoiseConfig(sigma_g=0.0, sigma_bg=0.0, sigma_a=0.0, beta_g0=(0.0, 0.0, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
