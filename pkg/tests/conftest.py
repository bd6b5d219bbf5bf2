import numpy as np
import pytest

from virbott.grid import PeriodicGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid64():
    return PeriodicGrid(64)


def pytest_report_header(config):
    return "virbott: acceptance criteria print one PASS/FAIL line each in the terminal summary"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
