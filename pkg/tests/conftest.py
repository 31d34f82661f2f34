import numpy as np
import pytest

from nanopnp import scenarios


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def trumpet():
    return scenarios.trumpet()


@pytest.fixture(scope="session")
def conical():
    return scenarios.conical()
