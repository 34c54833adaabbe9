import json
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from threshold_lab.spectral.gamma_core import Configuration

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.register_profile("fast", max_examples=8, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

LOG2_OVER_2PI = np.log(2.0) / (2 * np.pi)


@pytest.fixture
def regular_config():
    return Configuration([[0.0, 0.0], [np.e, 0.0]], [0.0, 0.0])


@pytest.fixture
def swave_config():
    return Configuration([[0.0, 0.0], [1.0, 0.0]], [1.0, -1.0])


@pytest.fixture
def pwave_config():
    return Configuration([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0])


@pytest.fixture
def zero_config():
    return Configuration([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], [-LOG2_OVER_2PI, 0.0, -LOG2_OVER_2PI])


@pytest.fixture
def single_config():
    return Configuration([[0.0, 0.0]], [0.0])


@pytest.fixture
def write_json(tmp_path):
    """Write a JSON payload to a file under tmp_path and return its path."""
    def _write(name, payload):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return str(path)
    return _write
