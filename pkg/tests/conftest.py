import pytest

from twinbed.config import TwinConfig
from twinbed.vehicle import VehicleParams


@pytest.fixture
def params() -> VehicleParams:
    return VehicleParams()


@pytest.fixture
def config() -> TwinConfig:
    return TwinConfig.default()


@pytest.fixture
def track(config):
    return config.table.track()
