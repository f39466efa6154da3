import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rkhsrobust import DiscreteDistribution, KernelSpec, LossSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "rkhsrobust", "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gauss():
    return KernelSpec("gaussian", gamma=0.125)


@pytest.fixture
def squared():
    return LossSpec("squared")


@pytest.fixture
def ref_P():
    return DiscreteDistribution([[-0.6, 0.2], [-0.6, 0.5], [0.0, 0.45], [0.6, 0.3], [0.6, 0.6]])


def random_dist(rng, n, dim=2, scale=1.0, weights=True):
    atoms = rng.uniform(-scale, scale, size=(n, dim))
    w = rng.uniform(0.1, 1.0, size=n) if weights else None
    return DiscreteDistribution(atoms, w)
