"""Online drift-plus-penalty game manager.

Two variants share one engine.  ``general`` keeps ``Z_i``, ``Q_i`` and
``J_{i,v}^beta`` queues and picks ``theta`` every slot.  ``special``
(players observe nothing) keeps ``Z_i`` and ``Q_i^beta``.

The slot loop is compiled (see ``_kernel``).  Runs in a batch are
independent: run ``r`` uses its own generator seeded ``seeds[r]`` and its
own ``V``, so its trajectory is identical to running it alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .errors import ActionSpaceTooLarge, EmptyTrace, SizeCapExceeded
from .fairness import FairnessFunction
from .game import GameSpec, make_rng, sample_event_indices

ACTION_CAP = 1_000_000
VARIANTS = ("general", "special")


@dataclass(frozen=True)
class EngineConfig:
    fairness: FairnessFunction
    V: float
    T: int
    seed: int = 0
    variant: str = "general"
    stride: int | None = None

    def __post_init__(self):
        if not self.V >= 0:
            raise ValueError(f"V must be >= 0, got {self.V}")
        if int(self.T) != self.T or self.T < 0:
            raise ValueError(f"T must be a nonnegative integer, got {self.T}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def record_stride(self) -> int:
        if self.stride is not None:
            return int(self.stride)
        return 1 if self.T <= 100_000 else 100

    def to_dict(self) -> dict:
        return {
            "fairness": self.fairness.to_dict(),
            "V": self.V,
            "T": self.T,
            "seed": self.seed,
            "variant": self.variant,
            "stride": self.record_stride,
        }


def check_variant(game: GameSpec, variant: str):
    if variant == "special" and not game.players_observe_nothing:
        raise ValueError("the special-case engine needs every player event alphabet to be a singleton")


# ---------------------------------------------------------------- per-slot rules


def choose_gamma(fairness: FairnessFunction, V, Z, caps) -> np.ndarray:
    """Maximize ``V * phi(gamma) - Z . gamma`` over the box ``[0, caps]``.

    Works on the last axis of ``Z``; ``V`` may carry one value per leading index.
    """
    Z = np.asarray(Z, dtype=float)
    caps = np.broadcast_to(np.asarray(caps, dtype=float), Z.shape)
    V = np.asarray(V, dtype=float)
    if V.ndim:
        V = V.reshape(V.shape + (1,) * (Z.ndim - V.ndim))
    if fairness.kind == "weighted-log":
        w = np.asarray(fairness.weights)
        with np.errstate(divide="ignore", invalid="ignore"):
            interior = np.clip(w * V / Z - 1.0, 0.0, caps)
        return np.where(Z <= 0, caps, interior)
    if fairness.kind == "linear":
        w = np.asarray(fairness.weights)
        return np.where(w * V - Z > 0, caps, 0.0)
    return _gamma_min_with_cap(fairness.cap, V, Z, caps)


def _gamma_min_with_cap(c, V, Z, caps):
    # Nonpositive-price players sit at their cap.  The others share a level m;
    # the objective is concave piecewise linear in m, so its maximum is at a
    # breakpoint.
    free = Z <= 0
    levels = np.unique(np.concatenate([[0.0, c], np.unique(caps)]))
    best_val, best = None, None
    for m in levels:
        gamma = np.where(free, caps, np.minimum(m, caps))
        val = V * np.minimum(gamma.min(axis=-1, keepdims=True), c) - (Z * gamma).sum(axis=-1, keepdims=True)
        if best is None:
            best_val, best = val, gamma
        else:
            better = val > best_val
            best = np.where(better, gamma, best)
            best_val = np.where(better, val, best_val)
    return best


def choose_theta(Q, J_cell_sums, caps) -> np.ndarray:
    """``theta_{i, omega_i} = u_i^max`` when ``Q_i < sum_beta J_{i,omega_i}^beta`` (strict), else 0."""
    Q = np.asarray(Q, dtype=float)
    return np.where(Q < np.asarray(J_cell_sums, dtype=float), np.broadcast_to(caps, Q.shape), 0.0)


@dataclass
class QueueState:
    """Virtual queues of one run.

    ``J`` holds one ``(|Omega_i|, |A_i|)`` array per player for the general
    engine and one ``(|A_i|,)`` array of ``Q_i^beta`` per player for the
    special engine, where ``Q`` is ``None``.
    """

    Z: np.ndarray
    Q: np.ndarray | None
    J: list[np.ndarray]

    @classmethod
    def zeros(cls, game: GameSpec, variant: str = "general") -> QueueState:
        check_variant(game, variant)
        N = game.num_players
        if variant == "special":
            return cls(np.zeros(N), None, [np.zeros(game.action_shape[i]) for i in range(N)])
        return cls(
            np.zeros(N),
            np.zeros(N),
            [np.zeros((game.event_shape[i + 1], game.action_shape[i])) for i in range(N)],
        )

    @property
    def variant(self) -> str:
        return "special" if self.Q is None else "general"

    def vector(self) -> np.ndarray:
        parts = [self.Z] + ([] if self.Q is None else [self.Q]) + [j.reshape(-1) for j in self.J]
        return np.concatenate(parts)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.vector() ** 2)))

    def lyapunov(self) -> float:
        return 0.5 * float(np.sum(self.vector() ** 2))


@dataclass
class SlotDecision:
    gamma: np.ndarray
    theta: np.ndarray
    alpha: int
    utilities: np.ndarray
    deviation: list[np.ndarray]


def _seq_sum(values) -> float:
    # left-to-right accumulation, the order used by the compiled loop
    s = 0.0
    for x in np.asarray(values, dtype=float).reshape(-1):
        s += x
    return s


def _coefficients(state: QueueState, game: GameSpec, omega: int):
    """Weights on ``u_i`` and on each ``u_i((beta, alpha_-i))`` in the action objective."""
    ev = game.event_tuple(omega)
    if state.Q is None:
        cell = list(state.J)
        own = -(state.Z + np.array([_seq_sum(c) for c in cell]))
    else:
        cell = [state.J[i][ev[i + 1]] for i in range(game.num_players)]
        own = -(state.Z + state.Q)
    return np.concatenate([own] + cell)


def _slot_table(game: GameSpec, omega: int) -> np.ndarray:
    """``(|A|, N + sum |A_i|)``: own utilities then every deviation utility at event ``omega``."""
    cols = [game.utilities[:, :, omega].T]
    for i in range(game.num_players):
        cols.append(game.deviation_utilities(i)[:, :, omega].T)
    return np.hstack(cols)


def _check_action_space(game):
    if game.num_actions > ACTION_CAP:
        raise ActionSpaceTooLarge(
            f"{game.num_actions} joint actions exceeds the enumeration cap {ACTION_CAP}"
        )


def action_costs(game: GameSpec, state: QueueState, omega: int) -> np.ndarray:
    _check_action_space(game)
    coef = _coefficients(state, game, omega)
    table = _slot_table(game, omega)
    cost = np.zeros(table.shape[0])
    for k in range(table.shape[1]):
        cost += coef[k] * table[:, k]
    return cost


def choose_actions(game: GameSpec, state: QueueState, omega: int) -> int:
    """Flat joint action minimizing the queue-weighted objective; first index on ties."""
    return int(np.argmin(action_costs(game, state, omega)))


def realize(game: GameSpec, alpha: int, omega: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Utilities and per-player deviation utilities ``u_i((beta, alpha_-i), omega)``."""
    u = game.utilities[:, alpha, omega].copy()
    dev = [game.deviation_utilities(i)[:, alpha, omega].copy() for i in range(game.num_players)]
    return u, dev


def decide(game: GameSpec, fairness: FairnessFunction, V: float, state: QueueState, omega: int) -> SlotDecision:
    ev = game.event_tuple(omega)
    gamma = choose_gamma(fairness, V, state.Z, game.caps)
    if state.Q is None:
        theta = np.zeros(game.num_players)
    else:
        sums = np.array([_seq_sum(state.J[i][ev[i + 1]]) for i in range(game.num_players)])
        theta = choose_theta(state.Q, sums, game.caps)
    alpha = choose_actions(game, state, omega)
    u, dev = realize(game, alpha, omega)
    return SlotDecision(gamma, theta, alpha, u, dev)


def update_queues(state: QueueState, decision: SlotDecision, game: GameSpec, omega: int) -> QueueState:
    """Apply the queue recursions for one slot (returns a new state)."""
    u = decision.utilities
    Z = state.Z + decision.gamma - u
    if state.Q is None:
        J = [np.maximum(state.J[i] + decision.deviation[i] - u[i], 0.0) for i in range(len(u))]
        return QueueState(Z, None, J)
    ev = game.event_tuple(omega)
    Q = np.maximum(state.Q + decision.theta - u, 0.0)
    J = []
    for i in range(len(u)):
        Ji = state.J[i].copy()
        v = ev[i + 1]
        Ji[v] = np.maximum(Ji[v] + decision.deviation[i] - decision.theta[i], 0.0)
        J.append(Ji)
    return QueueState(Z, Q, J)


def drift_rhs(
    game: GameSpec,
    fairness: FairnessFunction,
    V: float,
    B: float,
    state: QueueState,
    omega: int,
    gamma,
    theta,
    alpha: int,
) -> float:
    """Drift-plus-penalty bound evaluated at one candidate decision."""
    u, dev = realize(game, alpha, omega)
    gamma = np.asarray(gamma, dtype=float)
    val = B - V * float(fairness(gamma)) + float(state.Z @ (gamma - u))
    if state.Q is None:
        for i in range(game.num_players):
            val += float(state.J[i] @ (dev[i] - u[i]))
        return val
    theta = np.asarray(theta, dtype=float)
    ev = game.event_tuple(omega)
    val += float(state.Q @ (theta - u))
    for i in range(game.num_players):
        val += float(state.J[i][ev[i + 1]] @ (dev[i] - theta[i]))
    return val


# ---------------------------------------------------------------- bounds


def drift_constant(game: GameSpec) -> float:
    caps2 = np.asarray(game.caps) ** 2
    return float(caps2.sum() + 0.5 * (np.asarray(game.action_shape) * caps2).sum())


@dataclass
class BoundReport:
    B: float
    g_max: float
    phi_star: float
    estimated: bool
    V: float

    @property
    def utility_lower_bound(self) -> float:
        return self.phi_star - self.B / self.V if self.V > 0 else -np.inf

    def envelope(self, t):
        """Queue-norm-per-slot envelope ``sqrt((2B + 2V(g_max - phi*)) / t)``."""
        t = np.asarray(t, dtype=float)
        num = max(2.0 * self.B + 2.0 * self.V * (self.g_max - self.phi_star), 0.0)
        with np.errstate(divide="ignore"):
            out = np.sqrt(num / t)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "g_max": self.g_max,
            "phi_star": self.phi_star,
            "phi_star_estimated": self.estimated,
            "V": self.V,
            "utility_lower_bound": self.utility_lower_bound,
        }


def theorem_bounds(game: GameSpec, config: EngineConfig, phi_star: float | None = None, trace=None) -> BoundReport:
    """Closed-form bound quantities.

    ``phi_star`` defaults to the offline stochastic CCE optimum.  If that
    solve hits a size cap, the best running ``g`` average of ``trace`` is
    used and the report is flagged as estimated.
    """
    B = drift_constant(game)
    g_max = config.fairness.max_over_box(game.caps)
    estimated = False
    if phi_star is None:
        from .stochastic import optimize_stochastic

        try:
            phi_star = optimize_stochastic(game, config.fairness, "cce").value
        except SizeCapExceeded:
            if trace is None or not len(trace.gbar):
                raise
            phi_star = float(np.max(trace.gbar))
            estimated = True
    return BoundReport(B, float(g_max), float(phi_star), estimated, float(config.V))


# ---------------------------------------------------------------- engine


@dataclass
class TraceRecord:
    """One run.

    ``omega``/``alpha`` hold every slot.  The recorded arrays hold one row
    per recorded time ``t`` (slots elapsed, a multiple of the stride): the
    decision taken in slot ``t - 1``, the queues ``X(t)`` after its update
    and averages over slots ``0 .. t - 1``.
    """

    seed: int
    V: float
    variant: str
    T: int
    stride: int
    queue_names: tuple[str, ...]
    omega: np.ndarray
    alpha: np.ndarray
    t: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    queues: np.ndarray
    norm: np.ndarray
    ubar: np.ndarray
    gammabar: np.ndarray
    gbar: np.ndarray
    theta_cell_avg: np.ndarray = field(repr=False)
    deviation_cell_avg: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.T

    @property
    def final_queues(self) -> np.ndarray:
        return self.queues[-1] if len(self.t) else np.zeros(len(self.queue_names))

    def final_norm(self) -> float:
        return float(self.norm[-1]) if len(self.t) else 0.0

    def phi_gammabar(self, fairness: FairnessFunction) -> np.ndarray:
        return np.asarray(fairness(self.gammabar))

    def at(self, t: int) -> int:
        """Row index of recorded time ``t``."""
        k = np.searchsorted(self.t, t)
        if k >= len(self.t) or self.t[k] != t:
            raise KeyError(f"time {t} was not recorded (stride {self.stride})")
        return int(k)


class _Layout:
    """Index tables shared by every run of a batch."""

    def __init__(self, game: GameSpec, variant: str):
        N = game.num_players
        self.N = N
        self.A = game.num_actions
        self.variant = variant
        sizes = list(game.action_shape)
        self.K = sum(sizes)
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
        self.seg = np.repeat(np.arange(N), sizes)
        ev = game.event_grid
        W = game.num_events
        self.table = np.stack([_slot_table(game, w) for w in range(W)])
        self.U = self.table[:, :, :N]
        self.Dev = self.table[:, :, N:]
        beta = np.concatenate([np.arange(m) for m in sizes])
        if variant == "special":
            self.cells = self.K
            self.jidx = np.broadcast_to(np.arange(self.K), (W, self.K)).copy()
            self.names = [f"Z{i + 1}" for i in range(N)]
            self.names += [f"Q{i + 1}^{b}" for i in range(N) for b in range(sizes[i])]
        else:
            block = [game.event_shape[i + 1] * sizes[i] for i in range(N)]
            joff = np.concatenate([[0], np.cumsum(block)[:-1]]).astype(int)
            self.cells = int(sum(block))
            self.jidx = joff[self.seg][None, :] + ev[:, 1:][:, self.seg] * np.asarray(sizes)[self.seg] + beta
            self.names = [f"Z{i + 1}" for i in range(N)] + [f"Q{i + 1}" for i in range(N)]
            self.names += [
                f"J{i + 1}[{v}]^{b}"
                for i in range(N)
                for v in range(game.event_shape[i + 1])
                for b in range(sizes[i])
            ]
        toff = np.concatenate([[0], np.cumsum(game.event_shape[1:])[:-1]]).astype(int)
        self.tcells = int(sum(game.event_shape[1:]))
        self.tidx = toff[None, :] + ev[:, 1:]


def run(game: GameSpec, config: EngineConfig) -> TraceRecord:
    """Simulate one run of ``config.T`` slots."""
    return run_batch(game, config, seeds=[config.seed])[0]


def run_batch(game: GameSpec, config: EngineConfig, seeds=None, Vs=None, hook=None, hook_slots=()) -> list[TraceRecord]:
    """Simulate independent runs, one per ``(seed, V)`` pair.

    ``seeds`` defaults to ``[config.seed]``; ``Vs`` defaults to ``config.V``
    for every run.  ``hook(t, run, state, omega, decision)`` is called for
    every run at each slot listed in ``hook_slots``, with the queues before
    the update.
    """
    check_variant(game, config.variant)
    _check_action_space(game)
    seeds = [config.seed] if seeds is None else [int(s) for s in seeds]
    Vs = [config.V] * len(seeds) if Vs is None else [float(v) for v in Vs]
    if len(Vs) != len(seeds):
        raise ValueError("seeds and Vs must have the same length")
    layout = _Layout(game, config.variant)
    return _simulate(game, config, layout, seeds, Vs, hook, hook_slots)


def _simulate(game, config, L, seeds, Vs, hook, hook_slots):
    R, T, N = len(seeds), int(config.T), L.N
    general = config.variant == "general"
    caps = np.asarray(game.caps, dtype=float)
    omega = np.zeros((R, T), dtype=np.int64)
    for r, s in enumerate(seeds):
        omega[r] = sample_event_indices(game, make_rng(s), T)
    stride = config.record_stride
    nrec = T // stride
    qdim = len(L.names)
    snaps = np.array(sorted(set(int(s) for s in hook_slots if 0 <= s < T)) if hook else [], dtype=np.int64)
    S = len(snaps)
    kind, weights, cap_c = _kernel.fairness_code(config.fairness)
    levels = np.unique(np.concatenate([[0.0, cap_c], np.unique(caps)]))
    alpha = np.zeros((R, T), dtype=np.int64)
    rec_gamma, rec_theta, rec_u = (np.zeros((R, nrec, N)) for _ in range(3))
    rec_q = np.zeros((R, nrec, qdim))
    rec_ubar, rec_gammabar = np.zeros((R, nrec, N)), np.zeros((R, nrec, N))
    rec_gbar = np.zeros((R, nrec))
    theta_avg, dev_avg = np.zeros((R, L.tcells)), np.zeros((R, L.cells))
    snap_q = np.zeros((R, S, qdim))
    snap_gamma, snap_theta = np.zeros((R, S, N)), np.zeros((R, S, N))
    snap_alpha = np.zeros((R, S), dtype=np.int64)
    _kernel.simulate(
        omega, np.asarray(Vs, dtype=float), caps, kind, weights, cap_c, levels, L.table,
        L.starts, np.asarray(game.action_shape, dtype=np.int64), L.seg, L.jidx, L.tidx,
        L.cells, L.tcells, general, stride, snaps,
        alpha, rec_gamma, rec_theta, rec_u, rec_q, rec_ubar, rec_gammabar, rec_gbar,
        theta_avg, dev_avg, snap_q, snap_gamma, snap_theta, snap_alpha,
    )
    for r in range(R):
        for k, t in enumerate(snaps):
            x = snap_q[r, k]
            state = _state_of(game, L, x[:N], x[N : 2 * N] if general else None, x[2 * N :] if general else x[N:])
            a, w = int(snap_alpha[r, k]), int(omega[r, t])
            u, dev = realize(game, a, w)
            hook(int(t), r, state, w, SlotDecision(snap_gamma[r, k].copy(), snap_theta[r, k].copy(), a, u, dev))

    norms = np.sqrt(np.sum(rec_q**2, axis=2))
    t_axis = np.arange(1, nrec + 1) * stride
    return [
        TraceRecord(
            seed=seeds[r],
            V=Vs[r],
            variant=config.variant,
            T=T,
            stride=stride,
            queue_names=tuple(L.names),
            omega=omega[r],
            alpha=alpha[r],
            t=t_axis,
            gamma=rec_gamma[r],
            theta=rec_theta[r],
            u=rec_u[r],
            queues=rec_q[r],
            norm=norms[r],
            ubar=rec_ubar[r],
            gammabar=rec_gammabar[r],
            gbar=rec_gbar[r],
            theta_cell_avg=theta_avg[r],
            deviation_cell_avg=dev_avg[r],
        )
        for r in range(R)
    ]


def _state_of(game, L, Z, Q, Jflat):
    N = game.num_players
    if Q is None:
        parts = np.split(Jflat, np.cumsum(game.action_shape)[:-1])
        return QueueState(Z.copy(), None, [p.copy() for p in parts])
    sizes = [game.event_shape[i + 1] * game.action_shape[i] for i in range(N)]
    parts = np.split(Jflat, np.cumsum(sizes)[:-1])
    J = [parts[i].reshape(game.event_shape[i + 1], game.action_shape[i]).copy() for i in range(N)]
    return QueueState(Z.copy(), Q.copy(), J)


def final_state(game: GameSpec, trace: TraceRecord) -> QueueState:
    """Queue state after the last recorded slot."""
    L = _Layout(game, trace.variant)
    x = trace.final_queues
    N = game.num_players
    if trace.variant == "special":
        return _state_of(game, L, x[:N], None, x[N:])
    return _state_of(game, L, x[:N], x[N : 2 * N], x[2 * N :])


# ---------------------------------------------------------------- analysis


def extract_empirical_policy(trace: TraceRecord, game: GameSpec) -> np.ndarray:
    """Empirical ``Pr[alpha | omega]`` from the trace; unseen events get zero rows."""
    if trace.T == 0:
        raise EmptyTrace("cannot extract a policy from an empty trace")
    W, A = game.num_events, game.num_actions
    counts = np.bincount(trace.omega * A + trace.alpha, minlength=W * A).reshape(W, A).astype(float)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def jensen_gap(trace: TraceRecord, fairness: FairnessFunction) -> np.ndarray:
    """``gbar(t) - phi(gammabar(t))`` per recorded row; nonpositive up to rounding."""
    return trace.gbar - trace.phi_gammabar(fairness)


def time_average_violation(trace: TraceRecord, game: GameSpec) -> float:
    """Largest violation of the time-average equilibrium constraints at the horizon."""
    if trace.T == 0:
        return 0.0
    ubar = trace.ubar[-1] if trace.stride == 1 or trace.t[-1] == trace.T else None
    if ubar is None:
        raise ValueError("the horizon must be a recorded time")
    N = game.num_players
    L = _Layout(game, trace.variant)
    dev = trace.deviation_cell_avg
    if trace.variant == "special":
        return float(np.max(dev - ubar[L.seg]))
    th = trace.theta_cell_avg
    toff = np.concatenate([[0], np.cumsum(game.event_shape[1:])]).astype(int)
    worst = []
    for i in range(N):
        worst.append(th[toff[i] : toff[i + 1]].sum() - ubar[i])
    sizes = [game.event_shape[i + 1] * game.action_shape[i] for i in range(N)]
    joff = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    for i in range(N):
        d = dev[joff[i] : joff[i + 1]].reshape(game.event_shape[i + 1], game.action_shape[i])
        worst.append(float(np.max(d - th[toff[i] : toff[i + 1]][:, None])))
    return float(max(worst))


@dataclass
class AuditReport:
    slots: list[int]
    alternatives: int
    worst_margin: float
    worst_drift_excess: float

    @property
    def greedy_ok(self) -> bool:
        return self.worst_margin <= 1e-9

    @property
    def drift_ok(self) -> bool:
        return self.worst_drift_excess <= 1e-9

    def to_dict(self) -> dict:
        return {
            "slots": len(self.slots),
            "alternatives": self.alternatives,
            "worst_margin": self.worst_margin,
            "worst_drift_excess": self.worst_drift_excess,
            "greedy_ok": self.greedy_ok,
            "drift_ok": self.drift_ok,
        }


def audit_greedy(
    game: GameSpec,
    config: EngineConfig,
    slots: int = 100,
    alternatives: int = 100,
    audit_seed: int = 0,
) -> AuditReport:
    """Compare the chosen decision against random feasible alternatives.

    ``worst_margin`` is the largest ``rhs(chosen) - rhs(alternative)`` over
    all audited slots and alternatives (should be <= 0).
    ``worst_drift_excess`` is the largest ``L(t+1) - L(t) - V phi(gamma(t)) - rhs(chosen)``,
    which the drift bound says is <= 0.
    """
    rng = make_rng(audit_seed)
    T = int(config.T)
    picks = sorted(rng.choice(T, size=min(slots, T), replace=False).tolist()) if T else []
    B = drift_constant(game)
    caps = np.asarray(game.caps, dtype=float)
    margins, excess = [-np.inf], [-np.inf]

    def hook(t, r, state, omega, dec):
        chosen = drift_rhs(game, config.fairness, config.V, B, state, omega, dec.gamma, dec.theta, dec.alpha)
        for _ in range(alternatives):
            g = rng.uniform(0.0, caps)
            th = rng.uniform(0.0, caps) if state.Q is not None else np.zeros(game.num_players)
            a = int(rng.integers(game.num_actions))
            alt = drift_rhs(game, config.fairness, config.V, B, state, omega, g, th, a)
            margins.append(chosen - alt)
        nxt = update_queues(state, dec, game, omega)
        drift = nxt.lyapunov() - state.lyapunov()
        penalty = config.V * float(config.fairness(dec.gamma))
        excess.append(drift - penalty - chosen)

    run_batch(game, config, hook=hook, hook_slots=picks)
    return AuditReport(picks, alternatives, float(max(margins)), float(max(excess)))
