from pathlib import Path

import pytest

from coarseglue import Cover, GroupWindow, MarkedGroup, line_space

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def line10():
    return line_space(10)


@pytest.fixture
def line10_cover(line10):
    return Cover(line10, {0: range(0, 7), 1: range(4, 10)})


@pytest.fixture(scope="session")
def fab6():
    return GroupWindow(MarkedGroup([0, 0], 6))


@pytest.fixture(scope="session")
def fab3():
    return GroupWindow(MarkedGroup([0, 0], 3))


@pytest.fixture(scope="session")
def zz5():
    return GroupWindow(MarkedGroup([0, 5], 5))
