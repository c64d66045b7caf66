import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def scene():
    from epiline.baselines.synthetic import make_synthetic_scene

    return make_synthetic_scene(0)


@pytest.fixture(scope="session")
def small_scene():
    from epiline.baselines.synthetic import make_synthetic_scene
    from epiline.geometry import ImageBounds

    return make_synthetic_scene(1, bounds=ImageBounds(160, 120), n_matches=120, supersample=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from scenario import ACCEPTANCE_LOG

    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
