import numpy as np
import pytest

from stochanneal import DeviceSurface, MaxCutInstance
from stochanneal.reference import get_reference


@pytest.fixture(scope="session")
def reference():
    """(surface, drift) from the shipped parameter file."""
    return get_reference()


@pytest.fixture(scope="session")
def ref_surface(reference):
    return reference[0]


@pytest.fixture(scope="session")
def ref_drift(reference):
    return reference[1]


@pytest.fixture()
def k3():
    return MaxCutInstance(
        n=3, edges=((0, 1, 1), (0, 2, 1), (1, 2, 1)), name="k3", best_known=2
    )


@pytest.fixture()
def flat_surface():
    """Constant mu = -5, constant sigma = 0.3 over the standard window."""
    return DeviceSurface(
        mu_coeffs=(-5.0, 0, 0, 0, 0, 0),
        sigma_coeffs=(0.3, 0, 0, 0, 0, 0),
        v_range=(1.6, 2.2),
        r_range=(10.0, 500.0),
    )


@pytest.fixture()
def steep_surface():
    """mu falls 3 decades/V around -5 at 1.8 V; near-deterministic sigma."""
    return DeviceSurface(
        mu_coeffs=(-5.0 + 3.0 * 1.8, -3.0, 0, 0, 0, 0),
        sigma_coeffs=(0, 0, 0, 0, 0, 0),
        v_range=(1.6, 2.2),
        r_range=(10.0, 500.0),
        sigma_floor=1e-9,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
