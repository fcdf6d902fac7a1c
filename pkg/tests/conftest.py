import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from surgailis.config_core import Configuration

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def configurations(max_size=5, lo=0.0, hi=1.0, min_size=0):
    coords = st.floats(lo, hi, allow_nan=False, allow_infinity=False)
    return st.lists(coords, min_size=min_size, max_size=max_size, unique=True).map(Configuration)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
