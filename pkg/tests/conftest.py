"""Shared fixtures; also prints the acceptance-suite report at the end of a run."""
from __future__ import annotations

import numpy as np
import pytest

from mg1retrial.dist import Burr, Exponential
from mg1retrial.transforms import QueueModel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def canonical():
    return QueueModel(0.5, 1.0, Burr(2.0, 3.0, 1.0))


@pytest.fixture(scope="session")
def mm1_retrial():
    return QueueModel(0.5, 0.5, Exponential(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
