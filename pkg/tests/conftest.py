import numpy as np
import pytest

from distmin.shapes import circle_of_length


@pytest.fixture(scope="session")
def circle_2pi():
    return circle_of_length(2.0 * np.pi, 2048)


@pytest.fixture(scope="session")
def circle_4pi():
    return circle_of_length(4.0 * np.pi, 2048)


@pytest.fixture(scope="session")
def small_circles():
    """Coarse pair for the flow-based checks, which are quadratic in the knot count."""
    return circle_of_length(2.0 * np.pi, 64), circle_of_length(np.pi, 64)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
