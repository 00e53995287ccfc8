import numpy as np
import pytest

from lyapgame.errors import NegativeUtility, ParseError
from lyapgame.fairness import FairnessFunction
from lyapgame.game import fig1_game, make_rng, random_game
from lyapgame.gamefile import bundled_game_path, dump_game, load_game_file, parse_game_text

SMALL = """
[players]
p1 = a b
p2 = x y
[events]
manager = calm busy
p1 = lo hi
[pmf]
product
manager = 0.5 0.5
p1 = 0.25 0.75
[utilities]
default = 1
p1: * * = 2
p1: a x | busy * _ = 7   # overrides the wildcard row above
p2: b * | * lo _ = 3
"""


def test_bundled_fig1_matches_builtin():
    doc = load_game_file("@fig1")
    assert doc.game == fig1_game()
    assert doc.fairness == FairnessFunction.weighted_log([10, 1])
    assert load_game_file(bundled_game_path("fig1")).game == fig1_game()


def test_bundled_weather(weather):
    assert weather.event_shape == (1, 2, 2)
    np.testing.assert_allclose(weather.pmf, [0.4, 0.2, 0.1, 0.3])


def test_wildcards_defaults_and_later_lines_win():
    g = parse_game_text(SMALL).game
    u = g.utilities.reshape(2, 2, 2, 2, 2, 1)
    assert u[0, 0, 0, 1, 0, 0] == 7 and u[0, 0, 0, 0, 0, 0] == 2
    assert u[0, 1, 1, 1, 1, 0] == 2
    assert u[1, 1, 0, 0, 0, 0] == 3 and u[1, 1, 1, 1, 0, 0] == 3
    assert u[1, 0, 0, 0, 0, 0] == 1 and u[1, 1, 0, 0, 1, 0] == 1
    np.testing.assert_allclose(g.pmf, [0.125, 0.375, 0.125, 0.375])


@pytest.mark.parametrize("seed", range(5))
def test_dump_round_trip(seed):
    g = random_game(make_rng(seed), [2, 3], [2, 1, 3])
    f = FairnessFunction.weighted_log([1.5, 0.25])
    doc = parse_game_text(dump_game(g, f))
    assert doc.game == g
    assert doc.fairness == f


def test_round_trip_min_with_cap(weather):
    f = FairnessFunction.min_with_cap(2.5)
    doc = parse_game_text(dump_game(weather, f))
    assert doc.game == weather and doc.fairness == f


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[players]\np1 = a\n[bogus]\n", 3, "unknown section"),
        ("p1 = a\n", 1, "before the first section"),
        ("[players]\np1 = a\np1 = b\n", 3, "declared twice"),
        ("[players]\np1 = a\n[utilities]\np1: a = x\n", 4, "expected a number"),
        ("[players]\np1 = a\n[utilities]\np9: a = 1\n", 4, "unknown player"),
        ("[players]\np1 = a\n[utilities]\np1: z = 1\n", 4, "unknown action"),
        ("[players]\np1 = a b\n[events]\np1 = u v\n[pmf]\n_ u = 0.5\n_ w = 0.5\n", 7, "unknown label"),
        ("[players]\np1 = a\n[fairness]\nkind = weighted-log\nweights = 1 2\n", 5, "expected 1 weights"),
        ("[players]\np1 = a\n[fairness]\nkind = cubic\nweights = 1\n", 4, "unknown fairness kind"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ParseError) as info:
        parse_game_text(text)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert info.value.category == "parse"


def test_missing_players_and_file():
    with pytest.raises(ParseError):
        parse_game_text("[utilities]\n")
    with pytest.raises(ParseError):
        load_game_file("/nonexistent/x.game")
    with pytest.raises(FileNotFoundError):
        bundled_game_path("nope")


def test_semantic_errors_surface_as_validation():
    with pytest.raises(NegativeUtility):
        parse_game_text("[players]\np1 = a\n[utilities]\np1: a = -1\n")
