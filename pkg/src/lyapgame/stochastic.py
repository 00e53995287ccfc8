"""Stochastic games: pure strategies, the virtual static game, stochastic equilibrium systems.

Decision variables of the stochastic systems are laid out as the policy
``Pr[alpha | omega]`` (row-major over ``(omega, alpha)``) followed by one
block of theta-type variables per player.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .concave import maximize_concave
from .errors import DimensionMismatch, EnumerationTooLarge
from .fairness import FairnessFunction
from .game import GameSpec, validate_game
from .linprog import LinearSystem
from .static import EXACT_TOL, CertificationReport, EquilibriumKind

ENUMERATION_CAP = 4096
PROFILE_CAP = 1_000_000


# ---------------------------------------------------------------- strategies


@dataclass(frozen=True)
class PureStrategy:
    """Deterministic map from player ``i``'s event values to its actions."""

    player: int
    index: int
    mapping: tuple[int, ...]

    def __call__(self, v: int) -> int:
        return self.mapping[v]


def strategy_count(game: GameSpec, i: int) -> int:
    return game.action_shape[i] ** game.event_shape[i + 1]


def strategy_table(game: GameSpec, i: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``(S_i, |Omega_i|)`` array; row ``s`` is the action chosen at each event value."""
    count = strategy_count(game, i)
    if count > cap:
        raise EnumerationTooLarge(
            f"player {i} has {game.action_shape[i]}^{game.event_shape[i + 1]} = {count} "
            f"pure strategies, above the cap {cap}"
        )
    shape = (game.action_shape[i],) * game.event_shape[i + 1]
    if not shape:
        return np.zeros((1, 0), dtype=int)
    return np.indices(shape).reshape(len(shape), -1).T.copy()


def enumerate_pure_strategies(game: GameSpec, i: int, cap: int = ENUMERATION_CAP) -> list[PureStrategy]:
    """All pure strategies of player ``i`` in mixed-radix order (first event value most significant)."""
    table = strategy_table(game, i, cap)
    return [PureStrategy(i, s, tuple(int(a) for a in row)) for s, row in enumerate(table)]


def _profile_shape(game, cap):
    shape = tuple(strategy_count(game, i) for i in range(game.num_players))
    for i in range(game.num_players):
        strategy_table(game, i, cap)
    total = int(np.prod(shape))
    if total * game.num_events > PROFILE_CAP:
        raise EnumerationTooLarge(
            f"{total} strategy profiles over {game.num_events} events exceeds {PROFILE_CAP} table entries"
        )
    return shape


def profile_actions(game: GameSpec, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``JA[s, omega]``: flat joint action played by profile ``s`` at joint event ``omega``."""
    shape = _profile_shape(game, cap)
    profiles = np.indices(shape).reshape(len(shape), -1).T
    ev = game.event_grid
    digits = []
    for i in range(game.num_players):
        table = strategy_table(game, i, cap)
        digits.append(table[profiles[:, i]][:, ev[:, i + 1]])
    return np.ravel_multi_index(tuple(digits), game.action_shape)


def virtual_utility(game: GameSpec, profile, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``h_i(s)`` for every player at one strategy profile (flat index or per-player indices)."""
    shape = _profile_shape(game, cap)
    s = profile if np.ndim(profile) == 0 else np.ravel_multi_index(tuple(profile), shape)
    ja = profile_actions(game, cap)[int(s)]
    w = np.arange(game.num_events)
    return game.utilities[:, ja, w] @ game.pmf


def virtual_static_game(game: GameSpec, cap: int = ENUMERATION_CAP) -> GameSpec:
    """Static game whose actions are pure strategies and whose payoffs are ``h_i``."""
    shape = _profile_shape(game, cap)
    ja = profile_actions(game, cap)
    w = np.arange(game.num_events)
    h = np.einsum("isw,w->is", game.utilities[:, ja, w[None, :]], game.pmf)
    return validate_game(
        {
            "players": game.player_names,
            "actions": [[f"s{k}" for k in range(m)] for m in shape],
            "utilities": h.reshape((game.num_players,) + shape),
        }
    )


def generation_matrix(game: GameSpec, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Linear map from profile pmf to flattened policy (zero rows where ``pi = 0``)."""
    ja = profile_actions(game, cap)
    S, W = ja.shape
    A = game.num_actions
    G = np.zeros((W * A, S))
    live = game.pmf > 0
    s_idx, w_idx = np.nonzero(np.broadcast_to(live, (S, W)))
    G[w_idx * A + ja[s_idx, w_idx], s_idx] = 1.0
    return G


def policy_from_profile_pmf(game: GameSpec, pmf, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Generated policy ``Pr[alpha | omega] = sum_s Pr[s] 1{b^(s)(omega) = alpha}``."""
    ja = profile_actions(game, cap)
    p = np.asarray(pmf, dtype=float).reshape(-1)
    if p.size != ja.shape[0]:
        raise DimensionMismatch(f"profile pmf has {p.size} entries, expected {ja.shape[0]}")
    P = np.zeros((game.num_events, game.num_actions))
    for w in np.flatnonzero(game.pmf > 0):
        np.add.at(P[w], ja[:, w], p)
    return P


# ---------------------------------------------------------------- systems


def policy_size(game: GameSpec) -> int:
    return game.num_events * game.num_actions


def utility_map(game: GameSpec, nvars: int | None = None) -> np.ndarray:
    """``(N, nvars)`` matrix sending the variable vector to expected utilities."""
    n = policy_size(game) if nvars is None else nvars
    M = np.zeros((game.num_players, n))
    weighted = game.utilities * game.pmf[None, None, :]
    M[:, : policy_size(game)] = weighted.transpose(0, 2, 1).reshape(game.num_players, -1)
    return M


def _policy_block(game, n):
    """Simplex equalities and bounds for the policy variables."""
    W, A = game.num_events, game.num_actions
    eq, hi = [], np.full(W * A, np.inf)
    for w in range(W):
        if game.pmf[w] > 0:
            row = np.zeros(n)
            row[w * A : (w + 1) * A] = 1.0
            eq.append((row, 1.0, ("simplex", w)))
        else:
            hi[w * A : (w + 1) * A] = 0.0
    return eq, hi


def _cell_weights(game, i):
    """``K[w, a, beta]`` weights: ``pi[w] * u_i((beta, a_-i), w)``."""
    D = game.deviation_utilities(i)
    return (D * game.pmf[None, None, :]).transpose(2, 1, 0)


def _theta_offsets(game, kind):
    sizes = []
    for i in range(game.num_players):
        cells = game.event_shape[i + 1]
        if kind is EquilibriumKind.CE:
            cells *= game.action_shape[i]
        sizes.append(cells)
    return np.concatenate([[0], np.cumsum(sizes)]) + policy_size(game)


def build_stochastic_cce_constraints(game: GameSpec, per_event: bool = False) -> LinearSystem:
    """Stochastic CCE system over the policy and ``theta_i(v)``.

    Rows are one aggregate inequality per player followed by one deviation
    inequality per ``(i, v, beta)``.  Because each policy row sums to 1 the
    theta terms enter linearly as ``pi_i(v) * theta_i(v)``.  Cells with
    ``pi_i(v) = 0`` pin theta to 0 and drop their rows.

    ``per_event=True`` builds the stricter variant with one aggregate row
    per ``(i, v)`` instead of one per player.
    """
    W, A, N = game.num_events, game.num_actions, game.num_players
    off = _theta_offsets(game, EquilibriumKind.CCE)
    n = int(off[-1])
    eq, phi = _policy_block(game, n)
    lo, hi = np.zeros(n), np.concatenate([phi, np.zeros(n - W * A)])
    M = utility_map(game, n)
    ev = game.event_grid
    aggregate = []
    deviation = []
    for i in range(N):
        marg = game.player_event_pmf(i)
        K = _cell_weights(game, i)
        rows_i = []
        for v in range(game.event_shape[i + 1]):
            t = int(off[i]) + v
            if marg[v] <= 0:
                continue
            hi[t] = game.caps[i]
            in_cell = ev[:, i + 1] == v
            if per_event:
                row = np.zeros(n)
                row[: W * A] = -(M[i, : W * A].reshape(W, A) * in_cell[:, None]).reshape(-1)
                row[t] = marg[v]
                rows_i.append((row, 0.0, ("aggregate", i, v)))
            for beta in range(game.action_shape[i]):
                row = np.zeros(n)
                row[: W * A] = (K[:, :, beta] * in_cell[:, None]).reshape(-1)
                row[t] = -marg[v]
                deviation.append((row, 0.0, ("deviation", i, v, beta)))
        if not per_event:
            row = np.zeros(n)
            row[: W * A] = -M[i, : W * A]
            for v in range(game.event_shape[i + 1]):
                row[int(off[i]) + v] = marg[v]
            rows_i.append((row, 0.0, ("aggregate", i)))
        aggregate.extend(rows_i)
    ub = aggregate + deviation
    names = [f"P[{w},{a}]" for w in range(W) for a in range(A)]
    names += [f"theta[{i},{v}]" for i in range(N) for v in range(game.event_shape[i + 1])]
    return LinearSystem.build(n, ub=ub, eq=eq, lo=lo, hi=hi, var_names=names)


def build_stochastic_ce_constraints(game: GameSpec) -> LinearSystem:
    """Stochastic CE system over the policy and ``y_i(v, c)``.

    ``y_i(v, c)`` stands for ``theta_i(v, c)`` times the probability of the
    cell ``{omega_i = v, alpha_i = c}``, which keeps the system linear.
    Deviation rows run over every ``beta`` (including ``beta = c``).  The
    ``cap`` rows ``y <= u_i^max * mass`` keep the recovered theta inside
    ``[0, u_i^max]``.
    """
    W, A, N = game.num_events, game.num_actions, game.num_players
    off = _theta_offsets(game, EquilibriumKind.CE)
    n = int(off[-1])
    eq, phi = _policy_block(game, n)
    lo, hi = np.zeros(n), np.concatenate([phi, np.zeros(n - W * A)])
    M = utility_map(game, n)
    ev, grid = game.event_grid, game.action_grid
    aggregate, deviation, caps = [], [], []
    for i in range(N):
        marg = game.player_event_pmf(i)
        K = _cell_weights(game, i)
        Ai = game.action_shape[i]
        agg = np.zeros(n)
        agg[: W * A] = -M[i, : W * A]
        for v in range(game.event_shape[i + 1]):
            if marg[v] <= 0:
                continue
            in_cell = ev[:, i + 1] == v
            for c in range(Ai):
                t = int(off[i]) + v * Ai + c
                hi[t] = game.caps[i] * marg[v]
                agg[t] = 1.0
                mask = np.outer(in_cell, grid[:, i] == c)
                for beta in range(Ai):
                    row = np.zeros(n)
                    row[: W * A] = (K[:, :, beta] * mask).reshape(-1)
                    row[t] = -1.0
                    deviation.append((row, 0.0, ("deviation", i, v, c, beta)))
                row = np.zeros(n)
                row[: W * A] = -game.caps[i] * (game.pmf[:, None] * mask).reshape(-1)
                row[t] = 1.0
                caps.append((row, 0.0, ("cap", i, v, c)))
        aggregate.append((agg, 0.0, ("aggregate", i)))
    names = [f"P[{w},{a}]" for w in range(W) for a in range(A)]
    names += [
        f"y[{i},{v},{c}]"
        for i in range(N)
        for v in range(game.event_shape[i + 1])
        for c in range(game.action_shape[i])
    ]
    return LinearSystem.build(n, ub=aggregate + deviation + caps, eq=eq, lo=lo, hi=hi, var_names=names)


def build_stochastic_constraints(game: GameSpec, kind) -> LinearSystem:
    kind = EquilibriumKind.parse(kind)
    if kind is EquilibriumKind.CE:
        return build_stochastic_ce_constraints(game)
    return build_stochastic_cce_constraints(game)


def constraint_counts(game: GameSpec, cap: int = ENUMERATION_CAP) -> dict:
    """Row counts of the virtual-static and stochastic CCE formulations.

    Formula values are always reported; the ``built`` entries count the rows
    actually emitted (``None`` when enumeration exceeds ``cap``).
    """
    from .static import build_cce_constraints

    N = game.num_players
    virtual = sum(game.action_shape[i] ** game.event_shape[i + 1] for i in range(N))
    stochastic = N + sum(game.action_shape[i] * game.event_shape[i + 1] for i in range(N))
    system = build_stochastic_cce_constraints(game)
    built_stochastic = system.count("aggregate") + system.count("deviation")
    try:
        built_virtual = build_cce_constraints(virtual_static_game(game, cap)).count("deviation")
    except EnumerationTooLarge:
        built_virtual = None
    return {
        "virtual_static_cce": virtual,
        "stochastic_cce": stochastic,
        "virtual_static_cce_built": built_virtual,
        "stochastic_cce_built": built_stochastic,
    }


# ---------------------------------------------------------------- deviations


@dataclass
class DeviationPlan:
    player: int
    mode: EquilibriumKind
    plan: np.ndarray
    value: float
    participation: float

    @property
    def gain(self) -> float:
        return self.value - self.participation


def _check_shape(game, policy):
    P = np.asarray(policy, dtype=float)
    if P.shape != (game.num_events, game.num_actions):
        raise DimensionMismatch(
            f"policy has shape {P.shape}, expected {(game.num_events, game.num_actions)}"
        )
    return P


def deviation_scores(game: GameSpec, policy, i: int, mode) -> np.ndarray:
    """Deviation utility per conditioning cell and deviation.

    CCE mode: ``(|Omega_i|, |A_i|)`` indexed ``[v, beta]``.
    CE mode: ``(|Omega_i|, |A_i|, |A_i|)`` indexed ``[v, c, beta]``.
    """
    mode = EquilibriumKind.parse(mode)
    P = _check_shape(game, policy)
    joint = game.pmf[:, None] * P
    D = game.deviation_utilities(i)
    onehot_v = np.eye(game.event_shape[i + 1])[game.event_grid[:, i + 1]]
    if mode is EquilibriumKind.CE:
        onehot_c = np.eye(game.action_shape[i])[game.action_grid[:, i]]
        return np.einsum("wa,baw,wv,ac->vcb", joint, D, onehot_v, onehot_c)
    return np.einsum("wa,baw,wv->vb", joint, D, onehot_v)


def participation_utilities(game: GameSpec, policy) -> np.ndarray:
    P = _check_shape(game, policy)
    return np.einsum("wa,iaw->i", game.pmf[:, None] * P, game.utilities)


def best_deviation(game: GameSpec, policy, i: int, mode="cce") -> DeviationPlan:
    """Optimal deviation plan: argmax per conditioning cell, first index on ties."""
    mode = EquilibriumKind.parse(mode)
    if mode is EquilibriumKind.NE:
        mode = EquilibriumKind.CCE
    scores = deviation_scores(game, policy, i, mode)
    plan = np.argmax(scores, axis=-1)
    value = float(np.max(scores, axis=-1).sum())
    return DeviationPlan(i, mode, plan, value, float(participation_utilities(game, policy)[i]))


def conditional_marginals(game: GameSpec, policy, i: int) -> np.ndarray:
    """``q_i[v, c] = Pr[alpha_i = c | omega_i = v]`` (rows with zero mass are zero)."""
    P = _check_shape(game, policy)
    joint = game.pmf[:, None] * P
    onehot_v = np.eye(game.event_shape[i + 1])[game.event_grid[:, i + 1]]
    onehot_c = np.eye(game.action_shape[i])[game.action_grid[:, i]]
    mass = onehot_v.T @ joint @ onehot_c
    marg = game.player_event_pmf(i)
    out = np.zeros_like(mass)
    live = marg > 0
    out[live] = mass[live] / marg[live, None]
    return out


def product_form_residual(game: GameSpec, policy) -> float:
    """Max over live ``omega`` of ``|Pr[alpha|omega] - prod_i Pr[alpha_i|omega_i]|``."""
    P = _check_shape(game, policy)
    qs = [conditional_marginals(game, P, i) for i in range(game.num_players)]
    ev, grid = game.event_grid, game.action_grid
    prod = np.ones_like(P)
    for i, q in enumerate(qs):
        prod *= q[ev[:, i + 1]][:, grid[:, i]]
    live = game.pmf > 0
    if not live.any():
        return 0.0
    return float(np.max(np.abs(prod[live] - P[live])))


def policy_simplex_residual(game: GameSpec, policy) -> float:
    P = _check_shape(game, policy)
    live = game.pmf > 0
    parts = [float(-P.min(initial=0.0))]
    if live.any():
        parts.append(float(np.max(np.abs(P[live].sum(axis=1) - 1.0))))
    if (~live).any():
        parts.append(float(np.max(np.abs(P[~live]))))
    return max(parts)


def certify_stochastic(game: GameSpec, policy, kind, tol: float = EXACT_TOL) -> CertificationReport:
    """Certify through the deviation oracle; NE also needs per-event product form."""
    kind = EquilibriumKind.parse(kind)
    P = _check_shape(game, policy)
    mode = EquilibriumKind.CE if kind is EquilibriumKind.CE else EquilibriumKind.CCE
    worst, where = policy_simplex_residual(game, P), ("simplex",)
    for i in range(game.num_players):
        plan = best_deviation(game, P, i, mode)
        if plan.gain > worst:
            worst, where = plan.gain, ("deviation", i, tuple(int(b) for b in plan.plan.reshape(-1)))
    if kind is EquilibriumKind.NE:
        pf = product_form_residual(game, P)
        if pf > worst:
            worst, where = pf, ("product-form",)
    worst = max(0.0, worst)
    ok = worst <= tol
    return CertificationReport(
        kind, ok, worst, None if ok else where, participation_utilities(game, P), tol
    )


# ---------------------------------------------------------------- optimization


@dataclass
class StochasticSolution:
    policy: np.ndarray
    theta: list[np.ndarray]
    utilities: np.ndarray
    value: float
    gap: float
    iterations: int
    x: np.ndarray


def split_solution(game: GameSpec, x, kind) -> tuple[np.ndarray, list[np.ndarray]]:
    """Policy and per-player theta arrays from a variable vector.

    For CE the stored ``y`` variables are divided by their cell mass
    (theta is reported as 0 on empty cells).
    """
    kind = EquilibriumKind.parse(kind)
    x = np.asarray(x, dtype=float)
    W, A = game.num_events, game.num_actions
    P = np.maximum(x[: W * A].reshape(W, A), 0.0)
    off = _theta_offsets(game, kind)
    thetas = []
    for i in range(game.num_players):
        block = x[int(off[i]) : int(off[i + 1])]
        if kind is EquilibriumKind.CE:
            y = block.reshape(game.event_shape[i + 1], game.action_shape[i])
            onehot_v = np.eye(game.event_shape[i + 1])[game.event_grid[:, i + 1]]
            onehot_c = np.eye(game.action_shape[i])[game.action_grid[:, i]]
            mass = onehot_v.T @ (game.pmf[:, None] * P) @ onehot_c
            theta = np.divide(y, mass, out=np.zeros_like(y), where=mass > 0)
            thetas.append(np.minimum(theta, game.caps[i]))
        else:
            thetas.append(block.copy())
    return P, thetas


def optimize_stochastic(game: GameSpec, fairness: FairnessFunction, kind="cce", **kw) -> StochasticSolution:
    """Maximize ``fairness`` of expected utilities over the stochastic CE or CCE system."""
    kind = EquilibriumKind.parse(kind)
    if kind is EquilibriumKind.NE:
        raise ValueError("NE is check-only: its feasible set is not convex")
    system = build_stochastic_constraints(game, kind)
    sol = maximize_concave(system, fairness, utility_map(game, system.n), **kw)
    P, theta = split_solution(game, sol.x, kind)
    return StochasticSolution(P, theta, sol.utilities, sol.value, sol.gap, sol.iterations, sol.x)
