import numpy as np
import pytest

from dlstm.lstm import SequenceSample

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_samples(rng, n, T, D, E):
    return [SequenceSample(rng.uniform(0, 1, size=(T, D)), rng.uniform(0, 1, size=E),
                           rng.uniform(0, 1)) for _ in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
