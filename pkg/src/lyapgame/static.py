"""Equilibrium constraint systems for static games and fairness optimization over them."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .concave import maximize_concave
from .errors import DimensionMismatch, NotStaticGame
from .fairness import FairnessFunction
from .game import GameSpec
from .linprog import LinearSystem, lp_solve

EXACT_TOL = 1e-9
SOLVER_TOL = 1e-6


class EquilibriumKind(str, Enum):
    NE = "ne"
    CE = "ce"
    CCE = "cce"

    @classmethod
    def parse(cls, kind) -> EquilibriumKind:
        if isinstance(kind, cls):
            return kind
        return cls(str(kind).lower())


@dataclass
class CertificationReport:
    kind: EquilibriumKind
    satisfied: bool
    worst_violation: float
    violating: tuple | None
    utilities: np.ndarray
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "satisfied": self.satisfied,
            "worst_violation": self.worst_violation,
            "violating": None if self.violating is None else list(self.violating),
            "utilities": [float(u) for u in self.utilities],
            "tolerance": self.tolerance,
        }


def require_static(game: GameSpec):
    if not game.is_static:
        raise NotStaticGame(f"game has event alphabet sizes {game.event_shape}; all must be 1")


def _tables(game):
    require_static(game)
    U = game.utilities[:, :, 0]
    D = [game.deviation_utilities(i)[:, :, 0] for i in range(game.num_players)]
    return U, D


def _simplex_rows(n):
    return [(np.ones(n), 1.0, ("simplex",))]


def build_cce_constraints(game: GameSpec) -> LinearSystem:
    """One row per ``(player, deviation)`` in lexicographic order, plus the simplex."""
    U, D = _tables(game)
    rows = []
    for i in range(game.num_players):
        for beta in range(game.action_shape[i]):
            rows.append((D[i][beta] - U[i], 0.0, ("deviation", i, beta)))
    n = game.num_actions
    return LinearSystem.build(n, ub=rows, eq=_simplex_rows(n), lo=0.0)


def build_ce_constraints(game: GameSpec) -> LinearSystem:
    """One row per ``(player, suggested action, deviation != suggestion)``."""
    U, D = _tables(game)
    rows = []
    grid = game.action_grid
    for i in range(game.num_players):
        for a in range(game.action_shape[i]):
            mask = grid[:, i] == a
            for beta in range(game.action_shape[i]):
                if beta == a:
                    continue
                rows.append((mask * (D[i][beta] - U[i]), 0.0, ("deviation", i, a, beta)))
    n = game.num_actions
    return LinearSystem.build(n, ub=rows, eq=_simplex_rows(n), lo=0.0)


def build_constraints(game: GameSpec, kind) -> LinearSystem:
    kind = EquilibriumKind.parse(kind)
    if kind is EquilibriumKind.CE:
        return build_ce_constraints(game)
    return build_cce_constraints(game)


def _as_pmf(game, pmf):
    p = np.asarray(pmf, dtype=float).reshape(-1)
    if p.size != game.num_actions:
        raise DimensionMismatch(f"pmf has {p.size} entries, game has {game.num_actions} joint actions")
    return p


def expected_utilities(game: GameSpec, pmf) -> np.ndarray:
    require_static(game)
    return game.utilities[:, :, 0] @ _as_pmf(game, pmf)


def marginals(game: GameSpec, pmf) -> list[np.ndarray]:
    nd = _as_pmf(game, pmf).reshape(game.action_shape)
    axes = range(game.num_players)
    return [nd.sum(axis=tuple(a for a in axes if a != i)) for i in axes]


def product_form_residual(game: GameSpec, pmf) -> float:
    p = _as_pmf(game, pmf)
    prod = np.ones(())
    for m in marginals(game, pmf):
        prod = np.multiply.outer(prod, m)
    return float(np.max(np.abs(prod.reshape(-1) - p)))


def certify(game: GameSpec, pmf, kind, tol: float = EXACT_TOL) -> CertificationReport:
    """Check ``pmf`` against the NE, CE or CCE inequalities.

    NE is the CCE system plus the requirement that the pmf equals the
    product of its own marginals.
    """
    kind = EquilibriumKind.parse(kind)
    p = _as_pmf(game, pmf)
    system = build_constraints(game, kind)
    worst, where = -np.inf, None
    if system.b_ub.size:
        res = system.residuals(p)
        k = int(np.argmax(res))
        worst, where = float(res[k]), system.ub_tags[k]
    simplex = max(float(-p.min()), abs(float(p.sum()) - 1.0))
    if simplex > worst:
        worst, where = simplex, ("simplex",)
    if kind is EquilibriumKind.NE:
        pf = product_form_residual(game, p)
        if pf > worst:
            worst, where = pf, ("product-form",)
    worst = max(0.0, worst)
    ok = worst <= tol
    return CertificationReport(
        kind, ok, worst, None if ok else where, expected_utilities(game, p), tol
    )


@dataclass
class StaticSolution:
    pmf: np.ndarray
    utilities: np.ndarray
    value: float
    gap: float
    iterations: int


def optimize_static(game: GameSpec, fairness: FairnessFunction, kind="cce", **kw) -> StaticSolution:
    """Maximize ``fairness`` of expected utilities over the CE or CCE polytope."""
    kind = EquilibriumKind.parse(kind)
    if kind is EquilibriumKind.NE:
        raise ValueError("NE is check-only: its feasible set is not convex")
    system = build_constraints(game, kind)
    sol = maximize_concave(system, fairness, game.utilities[:, :, 0], **kw)
    p = np.maximum(sol.x, 0.0)
    return StaticSolution(p, sol.utilities, sol.value, sol.gap, sol.iterations)


def silhouette_directions(count: int) -> np.ndarray:
    """``count`` unit vectors evenly spaced on the circle, starting at ``(1, 0)``."""
    angles = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def polytope_silhouette(game: GameSpec, kind, directions) -> np.ndarray:
    """Utility pair maximizing ``w . u`` over the polytope for each direction ``w``."""
    if game.num_players != 2:
        raise DimensionMismatch("silhouettes are drawn for two-player games")
    kind = EquilibriumKind.parse(kind)
    system = build_constraints(game, kind)
    U = game.utilities[:, :, 0]
    points = []
    for w in np.asarray(directions, dtype=float):
        sol = lp_solve(system, U.T @ w, "max")
        points.append(U @ sol.x)
    return np.array(points)


def convex_hull(points, tol: float = 1e-9) -> np.ndarray:
    """Hull vertices in counter-clockwise order (monotone chain, collinear points dropped)."""
    pts = np.unique(np.round(np.asarray(points, dtype=float), 12), axis=0)
    if len(pts) <= 2:
        if len(pts) == 2 and np.max(np.abs(pts[0] - pts[1])) <= tol:
            return pts[:1]
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross(out[-2], out[-1], p) <= tol:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    return hull
