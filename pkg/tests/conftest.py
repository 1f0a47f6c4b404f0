import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dataset_service import DatasetService

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def datasets():
    return DatasetService()


@pytest.fixture
def write_text(tmp_path):
    """Write *text* into a fresh file under tmp_path and return its path."""
    def _write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write
