import warnings

import pytest

from gridcut.datasets import load_ieee118, load_ieee118_raw, make_triangle, make_two_bus


@pytest.fixture(scope="session")
def ieee118_raw():
    return load_ieee118_raw()


@pytest.fixture(scope="session")
def ieee118():
    return load_ieee118()


@pytest.fixture
def two_bus():
    return make_two_bus()


@pytest.fixture
def triangle():
    return make_triangle()


@pytest.fixture(autouse=True)
def _quiet_case_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        yield


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
