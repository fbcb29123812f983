import numpy as np
import pytest

from workcap import EnvironmentModel
from workcap.verify import load_bundled


@pytest.fixture(scope="session")
def fig5() -> EnvironmentModel:
    """Binary memoryless channel: action 0 echoes 0, action 1 gives a fair coin."""
    return load_bundled("fig5")


@pytest.fixture(scope="session")
def identity_env() -> EnvironmentModel:
    return load_bundled("identity")


@pytest.fixture(scope="session")
def golden_mean() -> EnvironmentModel:
    """Two-state source with no two consecutive ones; unifilar product."""
    return load_bundled("golden_mean")


@pytest.fixture(scope="session")
def flip_noise() -> EnvironmentModel:
    return load_bundled("flip_noise")


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
