import pytest

from netcas.harness.scenario import load_scenario
from netcas.models import Curve, DeviceModel, LinkModel

# (criterion number, passed, detail) rows filled by test_acceptance
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def fig1():
    return load_scenario("fig1_split", strict=True)


@pytest.fixture(scope="session")
def cache_model(fig1):
    return fig1.cache


@pytest.fixture(scope="session")
def backend_model(fig1):
    return fig1.backend


@pytest.fixture
def flat_device():
    def make(iops=100_000.0, cv=0.0, name="dev"):
        return DeviceModel(name, iops, Curve.constant(), Curve.constant(), 1e-4, cv)

    return make


@pytest.fixture
def wide_link():
    return LinkModel(1e12)
