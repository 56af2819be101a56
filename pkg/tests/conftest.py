import numpy as np
import pytest

from aga.scenario_gen import generate_scenario

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture(scope="session")
def swap_scenario():
    return generate_scenario(7, "swap")


@pytest.fixture(scope="session")
def track_scenario():
    return generate_scenario(7, "track")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
