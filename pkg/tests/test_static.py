import itertools

import numpy as np
import pytest

from lyapgame.errors import NotStaticGame
from lyapgame.fairness import FairnessFunction
from lyapgame.game import make_rng, random_game
from lyapgame.linprog import lp_solve
from lyapgame.static import (
    EquilibriumKind,
    build_ce_constraints,
    build_cce_constraints,
    certify,
    convex_hull,
    expected_utilities,
    optimize_static,
    polytope_silhouette,
    silhouette_directions,
)

UNIQUE_CE = np.array([0, 0, 0.45, 0.15, 0.3, 0.1])


def direct_gains(game, p, kind):
    """Largest deviation gain computed straight from the definitions."""
    U = game.utilities[:, :, 0]
    shape = game.action_shape
    best = -np.inf
    for i in range(game.num_players):
        for beta in range(shape[i]):
            suggestions = range(shape[i]) if kind == "ce" else [None]
            for a in suggestions:
                gain = 0.0
                for k, prof in enumerate(itertools.product(*map(range, shape))):
                    if a is not None and prof[i] != a:
                        continue
                    dev = list(prof)
                    dev[i] = beta
                    gain += p[k] * (U[i][game.action_index(tuple(dev))] - U[i][k])
                best = max(best, gain)
    return best


def test_row_counts(fig1):
    assert build_ce_constraints(fig1).count("deviation") == 8
    assert build_cce_constraints(fig1).count("deviation") == 5


def test_unique_ce_recovered_from_any_objective(fig1):
    system = build_ce_constraints(fig1)
    rng = np.random.default_rng(0)
    for _ in range(10):
        sol = lp_solve(system, rng.normal(size=6))
        np.testing.assert_allclose(sol.x, UNIQUE_CE, atol=1e-9)


def test_unique_ce_is_the_mixed_nash(fig1):
    for kind in ("ne", "ce", "cce"):
        rep = certify(fig1, UNIQUE_CE, kind)
        assert rep.satisfied, kind
    np.testing.assert_allclose(rep.utilities, [3.5, 2.4])


def test_certify_pinpoints_violation(fig1):
    p = np.zeros(6)
    p[0] = 1.0  # (alpha, alpha): player 1 prefers beta
    rep = certify(fig1, p, "cce")
    assert not rep.satisfied
    assert rep.violating == ("deviation", 0, 1)
    assert rep.worst_violation == pytest.approx(2.0)
    rep = certify(fig1, UNIQUE_CE * 1.001, "cce")
    assert rep.violating == ("simplex",)
    assert rep.worst_violation == pytest.approx(1e-3)


def test_published_cce_points(fig1):
    corner = np.array([0.15, 0, 0.6, 0.15, 0, 0.1])
    assert certify(fig1, corner, "cce").satisfied
    assert not certify(fig1, corner, "ce").satisfied
    np.testing.assert_allclose(expected_utilities(fig1, corner), [3.5, 9.3], atol=1e-12)
    # printed to four digits, so the table sums to 0.9999
    tip = np.array([0.0368, 0, 0.9018, 0.0368, 0, 0.0245])
    tip /= tip.sum()
    assert certify(fig1, tip, "cce", tol=1e-3).satisfied
    np.testing.assert_allclose(expected_utilities(fig1, tip), [3.8773, 3.7914], atol=5e-4)


def test_ne_rejects_correlated_point(fig1):
    ce = lp_solve(build_cce_constraints(fig1), fig1.utilities[1, :, 0]).x
    rep = certify(fig1, ce, "ne")
    assert not rep.satisfied and rep.violating == ("product-form",)
    assert certify(fig1, ce, "cce").satisfied


@pytest.mark.parametrize("seed", range(8))
def test_rows_match_definitions(seed):
    g = random_game(make_rng(seed), [2, 3], [1, 1, 1])
    p = np.random.default_rng(seed).dirichlet(np.ones(g.num_actions))
    for kind in ("ce", "cce"):
        assert max(certify(g, p, kind).worst_violation, 0) == pytest.approx(max(direct_gains(g, p, kind), 0), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_ce_inside_cce(seed):
    g = random_game(make_rng(seed), [3, 2], [1, 1, 1])
    c = np.random.default_rng(seed).normal(size=g.num_actions)
    x = lp_solve(build_ce_constraints(g), c).x
    assert certify(g, x, "cce", tol=1e-9).satisfied
    assert lp_solve(build_cce_constraints(g), c).value >= c @ x - 1e-9


def test_silhouette_hull(fig1):
    dirs = silhouette_directions(64)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)
    hull = convex_hull(polytope_silhouette(fig1, "cce", dirs))
    expected = np.array([[3.5, 2.4], [3.8773006, 3.7914110], [3.5, 9.3]])
    assert len(hull) == 3
    for v in expected:
        assert np.min(np.max(np.abs(hull - v), axis=1)) <= 1e-6
    ce_hull = convex_hull(polytope_silhouette(fig1, "ce", dirs))
    np.testing.assert_allclose(ce_hull, [[3.5, 2.4]], atol=1e-9)


def test_convex_hull_drops_interior_and_collinear():
    pts = [[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1]]
    np.testing.assert_array_equal(convex_hull(pts), [[0, 0], [2, 0], [2, 2], [0, 2]])


def test_fairness_optimum(fig1, fig1_phi):
    sol = optimize_static(fig1, fig1_phi, "cce")
    np.testing.assert_allclose(sol.utilities, [3.7322540, 5.9090909], atol=1e-5)
    assert certify(fig1, sol.pmf, "cce", tol=1e-6).satisfied
    assert optimize_static(fig1, fig1_phi, "ce").utilities == pytest.approx([3.5, 2.4], abs=1e-6)


def test_min_with_cap_and_linear_optima(fig1):
    lin = optimize_static(fig1, FairnessFunction.linear([0, 1]), "cce")
    assert lin.utilities[1] == pytest.approx(9.3)
    mc = optimize_static(fig1, FairnessFunction.min_with_cap(100.0), "cce")
    # u1 = u2 on the edge from (3.8773, 3.7914) to (3.5, 9.3)
    a, b = np.array([3.8773006135, 3.7914110429]), np.array([3.5, 9.3])
    s = (a[0] - a[1]) / ((a[0] - a[1]) - (b[0] - b[1]))
    assert mc.value == pytest.approx(a[0] + s * (b[0] - a[0]), abs=1e-8)
    np.testing.assert_allclose(mc.utilities, mc.value, atol=1e-8)


def test_ne_cannot_be_optimized(fig1, fig1_phi):
    with pytest.raises(ValueError):
        optimize_static(fig1, fig1_phi, EquilibriumKind.NE)


def test_stochastic_game_rejected(weather):
    with pytest.raises(NotStaticGame):
        build_cce_constraints(weather)
