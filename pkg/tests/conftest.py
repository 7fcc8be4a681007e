import numpy as np
import pytest

from bedcover import env


@pytest.fixture(scope="session")
def default_config():
    return env.EnvConfig()


@pytest.fixture(scope="session")
def reset_state(default_config):
    state, _ = env.reset(default_config, 0)
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
