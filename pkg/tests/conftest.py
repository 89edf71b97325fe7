import numpy as np
import pytest

from resque.datasets import generate_synthetic


@pytest.fixture(scope="session")
def small_ds():
    return generate_synthetic(3, 20, 8, 8, 1, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
