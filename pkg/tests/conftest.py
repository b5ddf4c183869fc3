import numpy as np
import pytest
from hypothesis import strategies as st

from hypembed.group import FreeGroup, reduce_word


def words(rank=2, max_size=12):
    """Reduced words over ``rank`` generators."""
    return st.lists(st.integers(0, 2 * rank - 1), max_size=max_size).map(reduce_word)


@pytest.fixture(scope="session")
def F2():
    return FreeGroup(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
