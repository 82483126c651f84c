import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def default_params():
    from decosieve import SystemParams

    return SystemParams(m=1.0, omega=1.0, d=16)


@pytest.fixture(scope="session")
def default_ops(default_params):
    from decosieve import build_operators

    return build_operators(default_params)


def random_density(d, rng, rank=None):
    """Random full(ish)-rank density matrix, reproducible via ``rng``."""
    rank = rank or d
    a = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
