import math

import pytest

from dioph_curves.curves import Parabola, parse_curve

ACCEPTANCE_LINES = []

THETA_IRR = (math.sqrt(2) - 1, math.sqrt(3) - 1)


@pytest.fixture
def parabola():
    return Parabola()


@pytest.fixture
def cubic():
    return parse_curve("cubic")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
