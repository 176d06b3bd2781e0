import numpy as np
import pytest

from modalflow.fixtures import get_fixture


@pytest.fixture(scope="session")
def gauss1():
    return get_fixture("D_gauss1")


@pytest.fixture(scope="session")
def gauss2():
    return get_fixture("D_gauss2")


@pytest.fixture(scope="session")
def mix1():
    return get_fixture("D_mix1")


@pytest.fixture(scope="session")
def mix2():
    return get_fixture("D_mix2")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
