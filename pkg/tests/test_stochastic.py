import itertools

import numpy as np
import pytest

from lyapgame.errors import EnumerationTooLarge
from lyapgame.fairness import FairnessFunction
from lyapgame.game import make_rng, random_game, validate_game
from lyapgame.linprog import LinearSystem, is_feasible, lp_solve
from lyapgame.static import build_cce_constraints, certify, optimize_static
from lyapgame.stochastic import (
    best_deviation,
    build_stochastic_cce_constraints,
    build_stochastic_ce_constraints,
    certify_stochastic,
    conditional_marginals,
    constraint_counts,
    enumerate_pure_strategies,
    generation_matrix,
    optimize_stochastic,
    participation_utilities,
    policy_from_profile_pmf,
    policy_size,
    strategy_table,
    utility_map,
    virtual_static_game,
    virtual_utility,
)


def small_game(seed, actions=(2, 2), events=(1, 2, 2)):
    return random_game(make_rng(seed), list(actions), list(events), integer=True)


def random_policy(game, rng, sparse=False):
    P = rng.dirichlet(np.ones(game.num_actions) * (0.3 if sparse else 1.0), size=game.num_events)
    P[game.pmf == 0] = 0.0
    return P


def pinned(system, game, P):
    n = policy_size(game)
    return system.fix(np.arange(n), P.reshape(-1))


def brute_force_cce_gain(game, P, i):
    """Best gain over every pure deviation map v -> beta, by enumeration."""
    joint = game.pmf[:, None] * P
    D = game.deviation_utilities(i)
    ev = game.event_grid[:, i + 1]
    best = -np.inf
    for plan in itertools.product(range(game.action_shape[i]), repeat=game.event_shape[i + 1]):
        beta = np.asarray(plan)[ev]  # deviation per joint event
        val = sum(joint[w] @ D[beta[w], :, w] for w in range(game.num_events))
        best = max(best, val)
    return best - participation_utilities(game, P)[i]


def test_strategy_enumeration_order(weather):
    table = strategy_table(weather, 0)
    assert table.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    strategies = enumerate_pure_strategies(weather, 1)
    assert [s(1) for s in strategies] == [0, 1, 0, 1]


@pytest.mark.parametrize("seed", range(5))
def test_profile_pmf_utility_identity(seed):
    g = small_game(seed)
    vg = virtual_static_game(g)
    p = np.random.default_rng(seed).dirichlet(np.ones(vg.num_actions))
    P = policy_from_profile_pmf(g, p)
    np.testing.assert_allclose(participation_utilities(g, P), vg.utilities[:, :, 0] @ p, atol=1e-12)
    np.testing.assert_allclose(generation_matrix(g) @ p, P.reshape(-1), atol=1e-15)
    s = int(np.random.default_rng(seed).integers(vg.num_actions))
    np.testing.assert_allclose(virtual_utility(g, s), vg.utilities[:, s, 0])


@pytest.mark.parametrize("seed", range(6))
def test_best_deviation_matches_enumeration(seed):
    g = small_game(seed, actions=(2, 3), events=(2, 2, 3))
    P = random_policy(g, np.random.default_rng(seed))
    for i in range(2):
        assert best_deviation(g, P, i).gain == pytest.approx(brute_force_cce_gain(g, P, i), abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_pinned_cce_system_matches_oracle(seed):
    g = small_game(seed)
    system = build_stochastic_cce_constraints(g)
    rng = np.random.default_rng(seed)
    cases = [random_policy(g, rng, sparse=True) for _ in range(4)]
    for c in rng.normal(size=(4, system.n)):
        cases.append(lp_solve(system, c).x[: policy_size(g)].reshape(g.num_events, g.num_actions))
    for P in cases:
        assert is_feasible(pinned(system, g, P)) == certify_stochastic(g, P, "cce", tol=1e-9).satisfied


@pytest.mark.parametrize("seed", range(6))
def test_pinned_ce_system_matches_oracle(seed):
    g = small_game(seed)
    system = build_stochastic_ce_constraints(g)
    rng = np.random.default_rng(seed)
    cases = [random_policy(g, rng, sparse=True) for _ in range(4)]
    for c in rng.normal(size=(4, system.n)):
        cases.append(lp_solve(system, c).x[: policy_size(g)].reshape(g.num_events, g.num_actions))
    for P in cases:
        assert is_feasible(pinned(system, g, P)) == certify_stochastic(g, P, "ce", tol=1e-9).satisfied


@pytest.mark.parametrize("seed", range(4))
def test_ce_and_per_event_are_stricter(seed):
    g = small_game(seed)
    rng = np.random.default_rng(seed)
    cce = build_stochastic_cce_constraints(g)
    strict = build_stochastic_cce_constraints(g, per_event=True)
    ce = build_stochastic_ce_constraints(g)
    for c in rng.normal(size=(5, g.num_players)):
        v_cce = lp_solve(cce, utility_map(g, cce.n).T @ c).value
        assert lp_solve(strict, utility_map(g, strict.n).T @ c).value <= v_cce + 1e-9
        assert lp_solve(ce, utility_map(g, ce.n).T @ c).value <= v_cce + 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_generated_policy_feasibility_matches_virtual_game(seed):
    g = small_game(seed)
    vg = virtual_static_game(g)
    vsys = build_cce_constraints(vg)
    ssys = build_stochastic_cce_constraints(g)
    rng = np.random.default_rng(seed)
    pmfs = [rng.dirichlet(np.ones(vg.num_actions) * 0.3) for _ in range(3)]
    pmfs += [lp_solve(vsys, c).x for c in rng.normal(size=(3, vg.num_actions))]
    for p in pmfs:
        P = policy_from_profile_pmf(g, p)
        assert certify(vg, p, "cce", tol=1e-9).satisfied == is_feasible(pinned(ssys, g, P))


def test_virtual_pure_nash_gives_stochastic_nash():
    found = 0
    for seed in range(40):
        g = small_game(seed)
        vg = virtual_static_game(g)
        for s in range(vg.num_actions):
            p = np.zeros(vg.num_actions)
            p[s] = 1.0
            if certify(vg, p, "ne").satisfied:
                P = policy_from_profile_pmf(g, p)
                rep = certify_stochastic(g, P, "ne")
                assert rep.satisfied, (seed, s)
                found += 1
    assert found > 0


def test_conditional_marginals_of_product_policy(weather):
    q = [np.array([[0.3, 0.7], [0.6, 0.4]]), np.array([[0.5, 0.5], [0.9, 0.1]])]
    ev, grid = weather.event_grid, weather.action_grid
    P = q[0][ev[:, 1]][:, grid[:, 0]] * q[1][ev[:, 2]][:, grid[:, 1]]
    for i in range(2):
        np.testing.assert_allclose(conditional_marginals(weather, P, i), q[i])
    assert certify_stochastic(weather, P, "ne", tol=np.inf).satisfied


def test_static_embedding_matches_static_optimum(fig1, fig1_phi):
    a = optimize_stochastic(fig1, fig1_phi, "cce")
    b = optimize_static(fig1, fig1_phi, "cce")
    np.testing.assert_allclose(a.utilities, b.utilities, atol=1e-5)
    assert a.value == pytest.approx(17.47685438516512, abs=1e-8)


def test_optimize_weather(weather):
    phi = FairnessFunction.weighted_log([1, 1])
    cce = optimize_stochastic(weather, phi, "cce")
    ce = optimize_stochastic(weather, phi, "ce")
    assert certify_stochastic(weather, cce.policy, "cce", tol=1e-6).satisfied
    assert certify_stochastic(weather, ce.policy, "ce", tol=1e-6).satisfied
    assert ce.value <= cce.value + 1e-6
    for i, th in enumerate(ce.theta):
        assert np.all(th >= 0) and np.all(th <= weather.caps[i] + 1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_constraint_count_formulas(seed):
    rng = np.random.default_rng(seed)
    acts, evs = rng.integers(2, 4, size=2), rng.integers(2, 4, size=2)
    g = random_game(make_rng(seed), list(acts), [1, *evs])
    counts = constraint_counts(g)
    assert counts["stochastic_cce"] == counts["stochastic_cce_built"] == 2 + int(acts @ evs)
    assert counts["virtual_static_cce"] == int(sum(a**e for a, e in zip(acts, evs)))
    if counts["virtual_static_cce_built"] is not None:
        assert counts["virtual_static_cce_built"] == counts["virtual_static_cce"]


def test_zero_mass_cells_drop_rows():
    g = random_game(make_rng(0), [2, 2], [1, 2, 2])
    raw = g.pmf.reshape(1, 2, 2).copy()
    raw[0, 1, :] = 0.0
    raw /= raw.sum()
    h = validate_game({"actions": g.action_labels, "events": g.event_labels, "pmf": raw, "utilities": g.utilities.reshape(2, 2, 2, 1, 2, 2)})
    system = build_stochastic_cce_constraints(h)
    assert system.count("deviation") == 2 * (1 + 2)


def test_enumeration_cap():
    g = random_game(make_rng(0), [3, 2], [1, 9, 1])
    with pytest.raises(EnumerationTooLarge) as info:
        virtual_static_game(g)
    assert info.value.category == "size-cap"
    assert constraint_counts(g)["virtual_static_cce_built"] is None


@pytest.mark.parametrize("seed", [6, 8, 13, 15, 23])
def test_linked_image_optimum_matches_virtual_game(seed):
    # P = G p linking makes the equality block rank deficient
    g = random_game(make_rng(1000 + seed), [2, 2], [1, 2, 2])
    s = build_stochastic_cce_constraints(g)
    G = generation_matrix(g)
    S, m = G.shape[1], policy_size(g)
    link = np.hstack([np.eye(m), np.zeros((m, s.n - m)), -G])
    A_eq = np.vstack([np.hstack([s.A_eq, np.zeros((s.A_eq.shape[0], S))]), link])
    linked = LinearSystem(
        np.hstack([s.A_ub, np.zeros((s.A_ub.shape[0], S))]),
        s.b_ub,
        A_eq,
        np.concatenate([s.b_eq, np.zeros(m)]),
        np.concatenate([s.lo, np.zeros(S)]),
        np.concatenate([s.hi, np.full(S, np.inf)]),
    )
    vg = virtual_static_game(g)
    H = vg.utilities[:, :, 0]
    vsys = build_cce_constraints(vg)
    for c in np.random.default_rng(seed).normal(size=(3, 2)):
        sol = lp_solve(linked, utility_map(g, linked.n).T @ c)
        assert sol.violation <= 1e-9
        assert sol.value == pytest.approx(lp_solve(vsys, H.T @ c).value, abs=1e-6)
