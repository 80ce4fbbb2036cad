import numpy as np
import pytest

from henonlab import core, manifolds, periodic


@pytest.fixture(scope="session")
def sink_saddle_map():
    return core.ComposedAutomorphism.single(0.5, 0.0)


@pytest.fixture(scope="session")
def horseshoe():
    return core.ComposedAutomorphism.single(0.1, -6.0)


@pytest.fixture(scope="session")
def near_solenoid():
    return core.ComposedAutomorphism.single(0.05, 0.05)


@pytest.fixture(scope="session")
def complex_map():
    return core.ComposedAutomorphism.single(0.3j, -1 + 0.2j)


@pytest.fixture(scope="session")
def horseshoe_orbits(horseshoe):
    return {n: periodic.find_periodic(horseshoe, n) for n in range(1, 9)}


@pytest.fixture(scope="session")
def right_saddle(horseshoe_orbits):
    return max(horseshoe_orbits[1], key=lambda o: o.points[0, 0].real)


@pytest.fixture(scope="session")
def horseshoe_homoclinic(horseshoe, right_saddle):
    return manifolds.find_homoclinic(horseshoe, right_saddle, (0.1, 0.59))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
