import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def measurement_doc():
    """Two-field monitor document used across the suite."""
    return {
        "deviceID": "monitor-1",
        "measurements": [
            {
                "field": "temperature",
                "values": [{"time": "1658162155", "value": "30C"}],
            },
            {
                "field": "humidity",
                "values": [{"time": "1658162155", "value": "50"}],
            },
        ],
    }
