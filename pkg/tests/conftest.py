import numpy as np
import pytest

from ruellelab import fixtures


@pytest.fixture(scope="session")
def doubling():
    return fixtures.build("doubling-zero-potential")


@pytest.fixture(scope="session")
def mixed_zero():
    return fixtures.build("doubling-tripling-zero")


@pytest.fixture(scope="session")
def cos_sys():
    return fixtures.build("cos-potential")


@pytest.fixture(scope="session")
def doubling_cos():
    return fixtures.build("doubling-cos")


@pytest.fixture(scope="session")
def bernoulli():
    return fixtures.build("bernoulli-half")


@pytest.fixture(scope="session")
def markov():
    return fixtures.build("markov-decay")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cos2pi(x):
    return np.cos(2 * np.pi * np.asarray(x, dtype=float))


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
