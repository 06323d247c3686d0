import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from multires_toa import BandConfig, make_benchmark_scenario

settings.register_profile(
    "repo", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

T_DEFAULT = 640e-9
N_DEFAULT = 128


@pytest.fixture
def default_channel():
    return make_benchmark_scenario()


@pytest.fixture
def two_bands():
    return (BandConfig.from_hz(4e9, 200e6), BandConfig.from_hz(6e9, 200e6))


def assert_rel(actual, expected, rtol):
    actual, expected = np.asarray(actual), np.asarray(expected)
    err = np.max(np.abs(actual - expected) / np.abs(expected))
    assert err < rtol, f"relative error {err:.3g} >= {rtol:g}"


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def report(number, name, passed, detail):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
