import pytest

from frag_avalanche.model import make_params
from frag_avalanche.semigroup import reachable_support

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params():
    """Default scenario: r = 1/2, thresholds (1/4, 1/16)."""
    return make_params(0.5, (0.25, 0.0625))


@pytest.fixture(scope="session")
def space(params):
    return reachable_support(1.0, params)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
