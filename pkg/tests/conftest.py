from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# upper page, vendor A, 8000 P/E
BBM_A8000 = (20.72, 4143.52, 22.28, 7821.13)
BAC_PQ = (4.97e-3, 2.84e-3)
