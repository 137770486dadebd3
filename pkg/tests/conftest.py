import pytest

from qpl.arithmetic import Frequency
from qpl.potential import PotentialSpec


@pytest.fixture(scope="session")
def golden():
    return Frequency.golden()


@pytest.fixture(scope="session")
def amo():
    return PotentialSpec.almost_mathieu()


@pytest.fixture(scope="session")
def perturbed():
    return PotentialSpec.trig([2.0, 0.3])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
