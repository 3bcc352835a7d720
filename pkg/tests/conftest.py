import numpy as np
import pytest

from convbci.calibration import calibrate
from convbci.synth import SynthConfig, synthesize

# filled by test_acceptance; printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def workload_cal():
    session, truth = synthesize(SynthConfig("workload_calibration", seed=1, noise_sigma_uv=0.5))
    return session


@pytest.fixture(scope="session")
def workload_model(workload_cal):
    return calibrate(workload_cal, "workload")[0]


@pytest.fixture(scope="session")
def erp_cal():
    session, truth = synthesize(SynthConfig("erp_calibration", seed=4, noise_sigma_uv=0.5))
    return session


@pytest.fixture(scope="session")
def erp_model(erp_cal):
    return calibrate(erp_cal, "agreement")[0]


@pytest.fixture(scope="session")
def workload_conv():
    session, truth = synthesize(SynthConfig("workload_conversation", seed=2))
    return session
