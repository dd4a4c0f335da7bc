import numpy as np
import pytest

from spectralhmm.hmm import HmmModel

# Lines appended by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def two_state():
    """O = I, T = [[0.9, 0.2], [0.1, 0.8]] started in its stationary law [2/3, 1/3]."""
    T = np.array([[0.9, 0.2], [0.1, 0.8]])
    return HmmModel(T, np.eye(2), np.array([2 / 3, 1 / 3]))


@pytest.fixture
def three_state():
    T = np.array([[0.7, 0.2, 0.1], [0.2, 0.6, 0.3], [0.1, 0.2, 0.6]])
    O = np.array([[0.6, 0.1, 0.2], [0.3, 0.7, 0.1], [0.1, 0.2, 0.7]])
    from spectralhmm.hmm import stationary_distribution

    return HmmModel(T, O, stationary_distribution(T))
