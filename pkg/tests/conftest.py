import numpy as np
import pytest
from hypothesis import settings

from trapforge.pseudo import DriveParams, IonSpecies

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")

UM = 1e-6

# Lines appended by the acceptance module; printed after the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def yb():
    return IonSpecies.yb171()


@pytest.fixture(scope="session")
def drive():
    return DriveParams.from_frequency(100.0, 20e6)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
