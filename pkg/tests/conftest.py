import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dthsem import harmonic_oscillator, kepler_2d, pendulum

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def pend():
    return pendulum()


@pytest.fixture(scope="session")
def osc():
    return harmonic_oscillator()


@pytest.fixture(scope="session")
def kep():
    return kepler_2d()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
