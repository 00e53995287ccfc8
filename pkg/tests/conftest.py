import pytest

from lyapgame.fairness import FairnessFunction
from lyapgame.game import fig1_game
from lyapgame.gamefile import load_game_file

# lines appended by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fig1():
    return fig1_game()


@pytest.fixture
def fig1_phi():
    return FairnessFunction.weighted_log([10.0, 1.0])


@pytest.fixture
def weather():
    # two players privately observing dry/wet, correlated pmf
    return load_game_file("@weather").game


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
