"""Maximize a concave fairness of affine utilities over a polytope.

The polytope is only touched through :func:`lp_solve`, used as the linear
maximization oracle of a Frank-Wolfe method.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible
from .fairness import FairnessFunction
from .linprog import LinearSystem, lp_solve

DEFAULT_ITERATIONS = 10_000
DEFAULT_GAP_TOL = 1e-6


@dataclass
class ConcaveSolution:
    x: np.ndarray
    utilities: np.ndarray
    value: float
    gap: float
    iterations: int
    values: list = field(default_factory=list, repr=False)
    gaps: list = field(default_factory=list, repr=False)


def _oracle(system, c):
    sol = lp_solve(system, c, "max")
    if sol.status == "infeasible":
        raise Infeasible("constraint system is infeasible")
    if sol.status == "unbounded":
        raise Infeasible("linear oracle is unbounded; the feasible region must be a polytope")
    return sol.x


def _line_search(fairness, u, du, tmax):
    def slope(t):
        return float(fairness.gradient(u + t * du) @ du)

    if slope(tmax) >= 0:
        return tmax
    if slope(0.0) <= 0:
        return 0.0
    lo, hi = 0.0, tmax
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _key(x):
    return tuple(np.round(x, 10))


def maximize_concave(
    system: LinearSystem,
    fairness: FairnessFunction,
    utility_map,
    offset=None,
    iterations: int = DEFAULT_ITERATIONS,
    tol: float = DEFAULT_GAP_TOL,
    step: str = "line-search",
) -> ConcaveSolution:
    """Maximize ``fairness(utility_map @ x + offset)`` over the feasible set of ``system``.

    ``step="line-search"`` runs away-step Frank-Wolfe with exact line
    search (monotone objective); ``step="open-loop"`` uses the classic
    ``2 / (k + 2)`` step.  Linear objectives take a single LP solve and
    ``min-with-cap`` is solved exactly through its epigraph LP, so the
    reported gap is 0 for both.
    """
    M = np.atleast_2d(np.asarray(utility_map, dtype=float))
    o = np.zeros(M.shape[0]) if offset is None else np.asarray(offset, dtype=float)

    def finish(x, gap, k, values=(), gaps=()):
        u = M @ x + o
        return ConcaveSolution(x, u, float(fairness(u)), gap, k, list(values), list(gaps))

    if fairness.kind == "linear":
        x = _oracle(system, M.T @ np.asarray(fairness.weights))
        return finish(x, 0.0, 1)

    if fairness.kind == "min-with-cap":
        n, N = system.n, M.shape[0]
        pad = lambda A: np.hstack([A, np.zeros((A.shape[0], 1))])  # noqa: E731
        rows = np.hstack([-M, np.ones((N, 1))])
        epi = LinearSystem(
            np.vstack([pad(system.A_ub), rows]),
            np.concatenate([system.b_ub, o]),
            pad(system.A_eq),
            system.b_eq,
            np.append(system.lo, -np.inf),
            np.append(system.hi, fairness.cap),
        )
        c = np.zeros(n + 1)
        c[-1] = 1.0
        x = _oracle(epi, c)[:n]
        return finish(x, 0.0, 1)

    if step not in ("line-search", "open-loop"):
        raise ValueError("step must be 'line-search' or 'open-loop'")

    x = _oracle(system, M.T @ fairness.gradient(o))
    active = {_key(x): [x, 1.0]}
    values, gaps = [], []
    gap = np.inf
    for k in range(iterations):
        u = M @ x + o
        c = M.T @ fairness.gradient(u)
        s = _oracle(system, c)
        gap = float(c @ (s - x))
        values.append(float(fairness(u)))
        gaps.append(gap)
        if gap <= tol:
            break
        if step == "open-loop":
            x = x + 2.0 / (k + 2.0) * (s - x)
            continue

        keys = list(active)
        scores = [float(c @ active[kk][0]) for kk in keys]
        away_key = keys[int(np.argmin(scores))]
        away, lam = active[away_key]
        away_gap = float(c @ (x - away))
        if gap >= away_gap or len(active) == 1:
            d, tmax, forward = s - x, 1.0, True
        else:
            d, tmax, forward = x - away, lam / (1.0 - lam), False
        t = _line_search(fairness, u, M @ d, tmax)
        x = x + t * d
        if forward:
            if t >= 1.0:
                active = {_key(s): [s, 1.0]}
            else:
                for entry in active.values():
                    entry[1] *= 1.0 - t
                entry = active.setdefault(_key(s), [s, 0.0])
                entry[1] += t
        else:
            for entry in active.values():
                entry[1] *= 1.0 + t
            if t >= tmax:
                del active[away_key]
            else:
                active[away_key][1] -= t
    return finish(x, gap, len(gaps), values, gaps)
