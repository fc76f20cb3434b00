import numpy as np
import pytest

from sonoguide.anatomy import PhantomConfig, generate_phantom, icosphere


@pytest.fixture(scope="session")
def sphere50():
    """Subdivision-4 icosphere, radius 50 mm, centered at the origin."""
    return icosphere(50.0, 4)


@pytest.fixture(scope="session")
def phantom_config():
    return PhantomConfig(
        myo_radius_min=40.0,
        myo_radius_max=44.0,
        peri_radius=50.0,
        subdivisions=4,
        cycle_period=1.0,
        edf_index=0,
    )


@pytest.fixture(scope="session")
def phantom(phantom_config):
    return generate_phantom(phantom_config)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260808)
