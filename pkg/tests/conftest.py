import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, k, n=None, interior=True):
    F = rng.dirichlet(np.ones(k), size=n)
    if interior:
        F = np.clip(F, 1e-3, None)
        F = F / F.sum(axis=-1, keepdims=True)
    return F
