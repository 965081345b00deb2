import numpy as np
import pytest
from hypothesis import settings

from hyperharm.geometry import SpaceConfig, polar_point, random_directions
from hyperharm.streams import RandomStream

settings.register_profile("hyperharm", max_examples=60, deadline=None)
settings.load_profile("hyperharm")


@pytest.fixture
def rng():
    return RandomStream(12345)


@pytest.fixture(params=[2, 3], ids=["H2", "H3"])
def n(request):
    return request.param


@pytest.fixture
def h2():
    return SpaceConfig(n=2, a=1.0)


@pytest.fixture
def h3():
    return SpaceConfig(n=3, a=1.0)


def random_points(rng, count, n, rmax=3.0, a=1.0):
    """Points at radii uniform in [0, rmax] about the origin."""
    dirs = random_directions(rng, count, n)
    r = rng.gen.uniform(0, rmax, count)
    return polar_point(dirs, r, a)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
