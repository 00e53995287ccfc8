"""Dense two-phase simplex with Bland's anti-cycling rule."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, NumericalBreakdown

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-12
# entries at or below this are treated as zero in the ratio test
RATIO_ENTRY_TOL = 1e-9


@dataclass(frozen=True)
class LinearSystem:
    """``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lo <= x <= hi``.

    ``ub_tags``/``eq_tags`` label each row (a tuple whose first item names
    the constraint family) so builders can be audited row by row.
    """

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    ub_tags: tuple = ()
    eq_tags: tuple = ()
    var_names: tuple = ()

    def __post_init__(self):
        n = self.lo.shape[0]
        if self.A_ub.shape[1:] != (n,) or self.A_eq.shape[1:] != (n,):
            raise DimensionMismatch(
                f"constraint widths {self.A_ub.shape}, {self.A_eq.shape} do not match {n} variables"
            )
        if self.b_ub.shape != (self.A_ub.shape[0],) or self.b_eq.shape != (self.A_eq.shape[0],):
            raise DimensionMismatch("right-hand sides do not match row counts")
        if self.hi.shape != (n,) or np.any(self.lo > self.hi):
            raise DimensionMismatch("bounds must satisfy lo <= hi")

    @classmethod
    def build(cls, n, ub=(), eq=(), lo=0.0, hi=np.inf, var_names=()):
        """Assemble from ``(row, rhs, tag)`` triples; ``row`` is a dense length-``n`` vector."""
        def block(rows):
            if not rows:
                return np.zeros((0, n)), np.zeros(0), ()
            A = np.array([np.asarray(r, dtype=float) for r, _, _ in rows]).reshape(len(rows), n)
            b = np.array([float(v) for _, v, _ in rows])
            return A, b, tuple(t for _, _, t in rows)

        A_ub, b_ub, ub_tags = block(list(ub))
        A_eq, b_eq, eq_tags = block(list(eq))
        return cls(
            A_ub, b_ub, A_eq, b_eq,
            np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy(),
            np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy(),
            ub_tags, eq_tags, tuple(var_names),
        )

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    def count(self, family: str) -> int:
        return sum(1 for t in self.ub_tags if t and t[0] == family)

    def residuals(self, x) -> np.ndarray:
        """Per-row ``A_ub x - b_ub`` (positive means violated)."""
        return self.A_ub @ np.asarray(x, dtype=float) - self.b_ub

    def violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if self.b_ub.size:
            parts.append(float(np.max(self.residuals(x))))
        if self.b_eq.size:
            parts.append(float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        parts.append(float(np.max(self.lo - x, initial=0.0)))
        parts.append(float(np.max(x - self.hi, initial=0.0)))
        return max(parts)

    def fix(self, index, values) -> LinearSystem:
        """Copy with the variables at ``index`` pinned to ``values``."""
        lo, hi = self.lo.copy(), self.hi.copy()
        lo[index] = values
        hi[index] = values
        return replace(self, lo=lo, hi=hi)

    def add_rows(self, ub=(), eq=()) -> LinearSystem:
        extra = LinearSystem.build(self.n, ub, eq)
        return replace(
            self,
            A_ub=np.vstack([self.A_ub, extra.A_ub]),
            b_ub=np.concatenate([self.b_ub, extra.b_ub]),
            A_eq=np.vstack([self.A_eq, extra.A_eq]),
            b_eq=np.concatenate([self.b_eq, extra.b_eq]),
            ub_tags=self.ub_tags + extra.ub_tags,
            eq_tags=self.eq_tags + extra.eq_tags,
        )


@dataclass
class LpSolution:
    """Result of :func:`lp_solve`.

    For an optimal solution the duals satisfy
    ``c = A_ub^T duals_ub + A_eq^T duals_eq + bound_duals`` with
    ``duals_ub >= 0`` when maximizing (``<= 0`` when minimizing).
    """

    status: str
    x: np.ndarray | None = None
    value: float | None = None
    violation: float | None = None
    duals_ub: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    bound_duals: np.ndarray | None = None
    pivots: int = 0
    basis: tuple = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(T, r, j):
    piv = T[r, j]
    if abs(piv) < PIVOT_TOL:
        raise NumericalBreakdown(f"pivot magnitude {abs(piv):.3e} below {PIVOT_TOL}")
    T[r] /= piv
    f = T[:, j].copy()
    f[r] = 0.0
    T -= np.outer(f, T[r])


def _bland(T, basis, ncols):
    """Iterate to optimality on columns ``[0, ncols)``; last row holds reduced costs."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        d = T[-1, :ncols]
        entering = np.flatnonzero(d < -OPT_TOL)
        if entering.size == 0:
            return "optimal", pivots
        j = int(entering[0])
        col = T[:m, j]
        rows = np.flatnonzero(col > RATIO_ENTRY_TOL)
        if rows.size == 0:
            return "unbounded", pivots
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        _pivot(T, r, j)
        basis[r] = j
        pivots += 1


def _objective_row(T, basis, cost):
    m = T.shape[0] - 1
    row = np.zeros(T.shape[1])
    row[: cost.size] = cost
    row -= cost[basis] @ T[:m]
    return row


def lp_solve(system: LinearSystem, c, sense: str = "max") -> LpSolution:
    """Optimize ``c . x`` over ``system``.

    Returns status ``optimal``, ``infeasible`` or ``unbounded``.  Raises
    :class:`NumericalBreakdown` on a pivot below ``1e-12`` or when the
    returned point misses the feasibility tolerance.
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    c = np.asarray(c, dtype=float)
    n = system.n
    if c.shape != (n,):
        raise DimensionMismatch(f"cost vector has shape {c.shape}, expected ({n},)")
    sign = -1.0 if sense == "max" else 1.0

    # x = x0 + Tm z with z >= 0
    lo, hi = system.lo, system.hi
    x0 = np.zeros(n)
    tcols, bound_rows = [], []
    for j in range(n):
        if np.isfinite(lo[j]):
            x0[j] = lo[j]
            tcols.append((j, 1.0))
            if np.isfinite(hi[j]):
                bound_rows.append((len(tcols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            x0[j] = hi[j]
            tcols.append((j, -1.0))
        else:
            tcols.append((j, 1.0))
            tcols.append((j, -1.0))
    nz = len(tcols)
    Tm = np.zeros((n, nz))
    for k, (j, s) in enumerate(tcols):
        Tm[j, k] = s

    m_orig = system.A_ub.shape[0]
    Bz = np.zeros((len(bound_rows), nz))
    for r, (k, _) in enumerate(bound_rows):
        Bz[r, k] = 1.0
    A1 = np.vstack([system.A_ub @ Tm, Bz])
    b1 = np.concatenate([system.b_ub - system.A_ub @ x0, [u for _, u in bound_rows]])
    A2 = system.A_eq @ Tm
    b2 = system.b_eq - system.A_eq @ x0
    m1, m2 = A1.shape[0], A2.shape[0]
    m = m1 + m2
    cost = np.concatenate([sign * (Tm.T @ c), np.zeros(m1)])

    S = np.zeros((m, nz + m1))
    S[:m1, :nz] = A1
    S[:m1, nz:] = np.eye(m1)
    S[m1:, :nz] = A2
    b = np.concatenate([b1, b2])
    sigma = np.where(b < 0, -1.0, 1.0)
    S *= sigma[:, None]
    b = b * sigma

    needs_art = [r for r in range(m) if r >= m1 or sigma[r] < 0]
    nbase = nz + m1
    nart = len(needs_art)
    T = np.zeros((m + 1, nbase + nart + 1))
    T[:m, :nbase] = S
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for r in range(m1):
        basis[r] = nz + r
    for k, r in enumerate(needs_art):
        T[r, nbase + k] = 1.0
        basis[r] = nbase + k

    pivots = 0
    if nart:
        cost1 = np.zeros(nbase + nart)
        cost1[nbase:] = 1.0
        T[-1] = _objective_row(T, basis, cost1)
        _, p = _bland(T, basis, nbase + nart)
        pivots += p
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpSolution("infeasible", pivots=pivots)
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= nbase:
                row = np.abs(T[r, :nbase])
                j = int(np.argmax(row)) if row.size else -1
                if j >= 0 and row[j] > RATIO_ENTRY_TOL:
                    _pivot(T, r, j)
                    basis[r] = j
                    pivots += 1
                else:
                    keep[r] = False
        rows_kept = np.flatnonzero(keep)
        T = np.vstack([T[rows_kept], T[-1:]])
        T = np.hstack([T[:, :nbase], T[:, -1:]])
        basis = basis[rows_kept]
    else:
        rows_kept = np.arange(m)

    T[-1] = _objective_row(T, basis, cost)
    status, p = _bland(T, basis, nbase)
    pivots += p
    if status == "unbounded":
        return LpSolution("unbounded", pivots=pivots)

    # recompute the basic solution from the original data for accuracy.
    # Dropped tableau rows are combinations of original rows, so after a
    # drop the basis is m x k with full column rank and the system stays
    # consistent; least squares then solves it exactly.
    B = S[:, basis]
    z_full = np.zeros(nbase)
    if rows_kept.size < m:
        z_full[basis] = np.linalg.lstsq(B, b, rcond=None)[0]
        y_s = np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]
    else:
        try:
            z_full[basis] = np.linalg.solve(B, b)
            y_s = np.linalg.solve(B.T, cost[basis])
        except np.linalg.LinAlgError:
            z_full[basis] = T[:-1, -1]
            y_s = np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]
    z_full = np.maximum(z_full, 0.0)
    x = x0 + Tm @ z_full[:nz]

    y = y_s * sigma
    y_user = -y if sense == "max" else y
    duals_ub = y_user[:m_orig]
    duals_eq = y_user[m1:]
    bound_duals = c - system.A_ub.T @ duals_ub - system.A_eq.T @ duals_eq

    violation = system.violation(x)
    if violation > FEAS_TOL:
        raise NumericalBreakdown(f"simplex point violates constraints by {violation:.3e}")
    return LpSolution(
        "optimal",
        x=x,
        value=float(c @ x),
        violation=violation,
        duals_ub=duals_ub,
        duals_eq=duals_eq,
        bound_duals=bound_duals,
        pivots=pivots,
        basis=tuple(int(k) for k in basis),
    )


def is_feasible(system: LinearSystem) -> bool:
    return lp_solve(system, np.zeros(system.n)).optimal
