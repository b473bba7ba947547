"""Shared fixtures plus the acceptance-criteria summary hook."""

import numpy as np
import pytest

# Populated by tests/test_acceptance.py; printed after the run so each
# criterion shows up as one legible pass/fail line.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
