import numpy as np
import pytest

from lyapgame.concave import maximize_concave
from lyapgame.errors import Infeasible
from lyapgame.fairness import FairnessFunction
from lyapgame.linprog import LinearSystem, lp_solve


def simplex(n):
    return LinearSystem.build(n, eq=[(np.ones(n), 1.0, ("simplex",))])


def water_filling(w):
    """Maximizer of sum w_i log(1 + x_i) on the probability simplex."""
    w = np.asarray(w, dtype=float)
    active = np.ones(len(w), dtype=bool)
    while True:
        level = (1.0 + active.sum()) / w[active].sum()
        x = np.where(active, w * level - 1.0, 0.0)
        if np.all(x >= -1e-15):
            return np.maximum(x, 0.0)
        active &= x > 0


@pytest.mark.parametrize("w", [[1, 1, 1], [10, 1, 1], [3, 2, 0.5]])
def test_weighted_log_matches_water_filling(w):
    f = FairnessFunction.weighted_log(w)
    sol = maximize_concave(simplex(3), f, np.eye(3))
    np.testing.assert_allclose(sol.x, water_filling(w), atol=1e-5)
    assert sol.gap <= 1e-6
    assert sol.value <= f(water_filling(w)) + 1e-12


def test_line_search_is_monotone_and_beats_open_loop():
    f = FairnessFunction.weighted_log([2, 1, 1])
    M = np.array([[3.0, 0.0, 1.0], [0.0, 2.0, 1.0], [1.0, 1.0, 0.0]])
    ls = maximize_concave(simplex(3), f, M)
    assert np.all(np.diff(ls.values) >= -1e-12)
    ol = maximize_concave(simplex(3), f, M, iterations=200, step="open-loop")
    assert ol.value <= ls.value + 1e-9
    assert ol.value == pytest.approx(ls.value, abs=1e-2)


def test_linear_objective_is_one_lp():
    M = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]])
    f = FairnessFunction.linear([1, 1])
    sol = maximize_concave(simplex(3), f, M)
    assert sol.iterations == 1 and sol.gap == 0.0
    assert sol.value == pytest.approx(lp_solve(simplex(3), M.T @ [1, 1]).value)


def test_min_with_cap_epigraph():
    M = np.array([[4.0, 0.0], [0.0, 2.0]])
    # min(4p, 2(1-p)) peaks at p = 1/3 with value 4/3
    sol = maximize_concave(simplex(2), FairnessFunction.min_with_cap(10.0), M)
    assert sol.value == pytest.approx(4 / 3)
    capped = maximize_concave(simplex(2), FairnessFunction.min_with_cap(1.0), M)
    assert capped.value == pytest.approx(1.0)


def test_offset_shifts_utilities():
    f = FairnessFunction.weighted_log([1, 1])
    sol = maximize_concave(simplex(2), f, np.eye(2), offset=[1.0, 0.0])
    # maximize log(2 + x) + log(1 + 1 - x): x = 0
    np.testing.assert_allclose(sol.utilities, [1.0, 1.0], atol=1e-6)


def test_infeasible_region_raises():
    bad = simplex(2).add_rows(ub=[([1, 1], 0.5, None)])
    with pytest.raises(Infeasible):
        maximize_concave(bad, FairnessFunction.weighted_log([1, 1]), np.eye(2))
