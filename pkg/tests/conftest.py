import math

import pytest

from causalstack.physics import Block, TowerState, settle
from causalstack.ppl import Bernoulli

CUBE = 7.5
HALF = CUBE / 2

ACCEPTANCE_LINES: list[str] = []


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def cube(i, x=0.0, y=0.0, z=0.0, mass=100.0):
    return Block(i, (x, y, z), (CUBE, CUBE, CUBE), mass)


def tower_from_xy(xys, mass=100.0):
    return settle(TowerState(tuple(cube(i, x, y, mass=mass) for i, (x, y) in enumerate(xys))))


def xor_collider(rt):
    u = rt.sample("u", Bernoulli(0.5))
    x = rt.deterministic("x", u)
    return rt.deterministic("y", x ^ u)


@pytest.fixture
def aligned2():
    return tower_from_xy([(0, 0), (0, 0)])


@pytest.fixture
def aligned3():
    return tower_from_xy([(0, 0), (0, 0), (0, 0)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
