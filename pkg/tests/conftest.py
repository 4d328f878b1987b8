import numpy as np
import pytest
from hypothesis import settings

from spiketrack.ann import record_lambdas
from spiketrack.conversion import convert
from spiketrack.zoo import calibration_crops, toy_branch

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def toy_ann():
    return toy_branch(0)


@pytest.fixture(scope="session")
def toy_calib():
    return calibration_crops(8)


@pytest.fixture(scope="session")
def toy_stats(toy_ann, toy_calib):
    return record_lambdas(toy_ann, toy_calib)


@pytest.fixture(scope="session")
def toy_snn(toy_ann, toy_stats):
    return convert(toy_ann, toy_stats)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance criteria report one line each at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
