import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import ACCEPTANCE, load  # noqa: E402


@pytest.fixture(scope="session")
def fig1a():
    return load("fig1a")


@pytest.fixture(scope="session")
def fig3():
    return load("fig3")


@pytest.fixture(scope="session")
def gbar():
    return load("gbar")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
