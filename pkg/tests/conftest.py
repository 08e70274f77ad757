import numpy as np
import pytest

from mstdoa.subspace import decompose
from mstdoa.synthesis import exact_covariance, reference_scenario


@pytest.fixture(scope="session")
def scenario():
    return reference_scenario(20.0)


@pytest.fixture(scope="session")
def oracle_cov(scenario):
    return exact_covariance(scenario)


@pytest.fixture(scope="session")
def oracle_noise(oracle_cov):
    return decompose(oracle_cov, 3).noise_basis


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
