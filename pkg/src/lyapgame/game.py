"""Finite stochastic games: representation, validation, sampling, lookup.

Joint actions and joint events are stored by their mixed-radix (C order)
flat index, so the first coordinate is the most significant digit and flat
order coincides with lexicographic order of the alphabets.  Players are
indexed from 0 in every public function; event component 0 is the
manager-only component.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyAlphabet,
    IndexOutOfRange,
    NegativeUtility,
    PmfNotNormalized,
    UtilityAboveCap,
)

PMF_TOL = 1e-12
SINGLETON = "_"


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A validated game; build it with :func:`validate_game`.

    ``pmf`` has one entry per joint event, ``utilities`` has shape
    ``(N, |A|, |Omega|)`` and ``caps`` holds the per-player maxima.
    """

    player_names: tuple[str, ...]
    action_labels: tuple[tuple[str, ...], ...]
    event_labels: tuple[tuple[str, ...], ...]
    pmf: np.ndarray
    utilities: np.ndarray
    caps: np.ndarray

    @property
    def num_players(self) -> int:
        return len(self.action_labels)

    @property
    def action_shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.action_labels)

    @property
    def event_shape(self) -> tuple[int, ...]:
        return tuple(len(e) for e in self.event_labels)

    @property
    def num_actions(self) -> int:
        return int(np.prod(self.action_shape))

    @property
    def num_events(self) -> int:
        return int(np.prod(self.event_shape))

    @property
    def is_static(self) -> bool:
        return self.num_events == 1

    @property
    def players_observe_nothing(self) -> bool:
        return all(n == 1 for n in self.event_shape[1:])

    def action_index(self, alpha) -> int:
        return _flat_index(alpha, self.action_labels, "action")

    def action_tuple(self, index: int) -> tuple[int, ...]:
        _check_range(index, self.num_actions, "joint action")
        return tuple(int(k) for k in np.unravel_index(index, self.action_shape))

    def event_index(self, omega) -> int:
        return _flat_index(omega, self.event_labels, "event")

    def event_tuple(self, index: int) -> tuple[int, ...]:
        _check_range(index, self.num_events, "joint event")
        return tuple(int(k) for k in np.unravel_index(index, self.event_shape))

    @cached_property
    def action_grid(self) -> np.ndarray:
        """``(|A|, N)`` array of per-player action indices for each joint action."""
        grid = np.indices(self.action_shape).reshape(self.num_players, -1)
        return grid.T.copy()

    @cached_property
    def event_grid(self) -> np.ndarray:
        """``(|Omega|, N + 1)`` array of component indices for each joint event."""
        grid = np.indices(self.event_shape).reshape(len(self.event_shape), -1)
        return grid.T.copy()

    def player_event_pmf(self, i: int) -> np.ndarray:
        """Marginal pmf of player ``i``'s own event component."""
        comp = self.event_grid[:, i + 1]
        return np.bincount(comp, weights=self.pmf, minlength=self.event_shape[i + 1])

    @cached_property
    def _deviation_tables(self) -> tuple[np.ndarray, ...]:
        tables = []
        n = self.num_players
        for i in range(n):
            nd = self.utilities[i].reshape(self.action_shape + (self.num_events,))
            stack = []
            for beta in range(self.action_shape[i]):
                fixed = np.take(nd, [beta], axis=i)
                stack.append(np.broadcast_to(fixed, nd.shape).reshape(self.num_actions, -1))
            table = np.stack(stack)
            table.setflags(write=False)
            tables.append(table)
        return tuple(tables)

    def deviation_utilities(self, i: int) -> np.ndarray:
        """``D[beta, alpha, omega]`` = utility of player ``i`` at ``(beta, alpha_-i)``."""
        _check_range(i, self.num_players, "player")
        return self._deviation_tables[i]

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        return (
            self.player_names == other.player_names
            and self.action_labels == other.action_labels
            and self.event_labels == other.event_labels
            and np.array_equal(self.pmf, other.pmf)
            and np.array_equal(self.utilities, other.utilities)
            and np.array_equal(self.caps, other.caps)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"GameSpec(players={self.player_names}, actions={self.action_shape}, "
            f"events={self.event_shape})"
        )


def _check_range(k, size, what):
    if not 0 <= k < size:
        raise IndexOutOfRange(f"{what} index {k} out of range [0, {size})")


def _flat_index(value, alphabets, what) -> int:
    if isinstance(value, (int, np.integer)):
        size = int(np.prod([len(a) for a in alphabets]))
        _check_range(int(value), size, f"joint {what}")
        return int(value)
    if len(value) != len(alphabets):
        raise IndexOutOfRange(
            f"{what} vector has {len(value)} components, expected {len(alphabets)}"
        )
    digits = []
    for pos, (v, labels) in enumerate(zip(value, alphabets)):
        if isinstance(v, str):
            if v not in labels:
                raise IndexOutOfRange(f"unknown {what} label {v!r} in component {pos}")
            v = labels.index(v)
        _check_range(int(v), len(labels), f"{what} component {pos}")
        digits.append(int(v))
    return int(np.ravel_multi_index(digits, [len(a) for a in alphabets]))


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _alphabet(labels, what) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if not labels:
        raise EmptyAlphabet(f"{what} is empty")
    if len(set(labels)) != len(labels):
        raise DimensionMismatch(f"{what} has duplicate labels")
    return labels


def validate_game(raw) -> GameSpec:
    """Check a raw game description and return an immutable :class:`GameSpec`.

    ``raw`` is either a ``GameSpec`` or a mapping with keys ``actions``
    (one label list per player), optional ``players`` (names), optional
    ``events`` (``N + 1`` label lists, manager component first; omitted
    components are singletons), optional ``pmf`` (dense array over the
    event grid, ``{"product": [...]}`` with one pmf per component, or
    ``{"entries": [(labels, p), ...]}``), ``utilities`` of shape
    ``(N, *action_shape[, *event_shape])`` and optional ``caps``.

    Declared caps above the observed table maxima are tightened to them.
    """
    if isinstance(raw, GameSpec):
        raw = {
            "players": raw.player_names,
            "actions": raw.action_labels,
            "events": raw.event_labels,
            "pmf": raw.pmf.reshape(raw.event_shape),
            "utilities": raw.utilities.reshape(
                (raw.num_players,) + raw.action_shape + raw.event_shape
            ),
            "caps": raw.caps,
        }
    if not isinstance(raw, Mapping):
        raise DimensionMismatch("game description must be a mapping")

    actions = raw.get("actions")
    if not actions:
        raise EmptyAlphabet("game has no players")
    action_labels = tuple(
        _alphabet(a, f"action alphabet of player {i}") for i, a in enumerate(actions)
    )
    n = len(action_labels)
    names = raw.get("players") or tuple(f"p{i + 1}" for i in range(n))
    names = tuple(str(x) for x in names)
    if len(names) != n or len(set(names)) != n:
        raise DimensionMismatch(f"expected {n} distinct player names, got {names}")

    events = raw.get("events")
    if events is None:
        events = [(SINGLETON,)] * (n + 1)
    if len(events) != n + 1:
        raise DimensionMismatch(f"expected {n + 1} event alphabets, got {len(events)}")
    event_labels = tuple(
        _alphabet(e, f"event alphabet of component {k}") for k, e in enumerate(events)
    )
    event_shape = tuple(len(e) for e in event_labels)
    action_shape = tuple(len(a) for a in action_labels)

    pmf = _build_pmf(raw.get("pmf"), event_labels)

    utilities = np.asarray(raw.get("utilities"), dtype=float)
    full = (n,) + action_shape + event_shape
    if utilities.shape == (n,) + action_shape and all(s == 1 for s in event_shape):
        utilities = utilities.reshape(full)
    if utilities.shape != full:
        raise DimensionMismatch(f"utility table has shape {utilities.shape}, expected {full}")
    if not np.all(np.isfinite(utilities)):
        raise DimensionMismatch("utility table contains non-finite entries")
    utilities = utilities.reshape(n, int(np.prod(action_shape)), int(np.prod(event_shape)))
    for i in range(n):
        bad = np.argwhere(utilities[i] < 0)
        if bad.size:
            a, w = bad[0]
            raise NegativeUtility(
                f"player {i} has utility {utilities[i, a, w]} < 0 at joint action {a}, event {w}"
            )

    observed = utilities.max(axis=(1, 2))
    caps = raw.get("caps")
    if caps is None:
        caps = observed
    else:
        caps = np.asarray(caps, dtype=float)
        if caps.shape != (n,):
            raise DimensionMismatch(f"expected {n} utility caps, got shape {caps.shape}")
        for i in range(n):
            if observed[i] > caps[i]:
                raise UtilityAboveCap(
                    f"player {i} utility {observed[i]} exceeds declared cap {caps[i]}"
                )
        caps = np.minimum(caps, observed)

    return GameSpec(
        player_names=names,
        action_labels=action_labels,
        event_labels=event_labels,
        pmf=_frozen(pmf),
        utilities=_frozen(utilities),
        caps=_frozen(caps),
    )


def _build_pmf(spec, event_labels) -> np.ndarray:
    shape = tuple(len(e) for e in event_labels)
    if spec is None:
        if any(s != 1 for s in shape):
            raise PmfNotNormalized("a pmf is required when some event alphabet has more than one value")
        pmf = np.ones(1)
    elif isinstance(spec, Mapping) and "product" in spec:
        parts = spec["product"]
        if len(parts) != len(shape):
            raise DimensionMismatch(f"product pmf needs {len(shape)} components, got {len(parts)}")
        pmf = np.ones(())
        for k, part in enumerate(parts):
            part = np.asarray(part, dtype=float)
            if part.shape != (shape[k],):
                raise DimensionMismatch(
                    f"component {k} pmf has {part.size} entries, expected {shape[k]}"
                )
            _check_pmf(part, f"component {k} pmf")
            pmf = np.multiply.outer(pmf, part)
        pmf = pmf.reshape(-1)
    elif isinstance(spec, Mapping) and "entries" in spec:
        pmf = np.zeros(shape)
        for labels, p in spec["entries"]:
            idx = _flat_index(tuple(labels), event_labels, "event")
            pmf.reshape(-1)[idx] += float(p)
        pmf = pmf.reshape(-1)
    else:
        pmf = np.asarray(spec, dtype=float)
        if pmf.size != int(np.prod(shape)) or pmf.shape not in (shape, (int(np.prod(shape)),)):
            raise DimensionMismatch(f"pmf has shape {pmf.shape}, expected {shape}")
        pmf = pmf.reshape(-1)
    _check_pmf(pmf, "event pmf")
    return pmf


def _check_pmf(p, what):
    if not np.all(np.isfinite(p)):
        raise PmfNotNormalized(f"{what} has non-finite entries")
    neg = np.flatnonzero(p < 0)
    if neg.size:
        raise PmfNotNormalized(f"{what} entry {neg[0]} is negative ({p[neg[0]]})")
    total = float(p.sum())
    if abs(total - 1.0) > PMF_TOL:
        raise PmfNotNormalized(f"{what} sums to {total!r}, not 1")


def utility(game: GameSpec, i: int, alpha, omega=0) -> float:
    """Table lookup of player ``i``'s utility at joint action ``alpha`` and event ``omega``.

    ``alpha``/``omega`` may be flat indices or per-component indices or labels.
    """
    _check_range(i, game.num_players, "player")
    return float(game.utilities[i, game.action_index(alpha), game.event_index(omega)])


def expected_payoffs(game: GameSpec, joint: np.ndarray) -> np.ndarray:
    """Utility vector for a weight array over ``(omega, alpha)`` (sums to 1)."""
    return np.einsum("wa,iaw->i", joint, game.utilities)


def event_cdf(game: GameSpec) -> np.ndarray:
    return np.cumsum(game.pmf)


def sample_event_indices(game: GameSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` flat joint-event indices, one uniform double per draw."""
    cdf = event_cdf(game)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    # guards the (1 - tiny) tail left by a cdf that ends just below 1
    last = int(np.flatnonzero(game.pmf > 0)[-1])
    return np.minimum(idx, last)


def sample_event(game: GameSpec, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one joint event as a tuple of component indices.

    The stream consumed is identical to :func:`sample_event_indices`, so a
    simulation driven by either produces the same event sequence for a seed.
    """
    return game.event_tuple(int(sample_event_indices(game, rng, 1)[0]))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator (numpy's documented default bit generator)."""
    return np.random.Generator(np.random.PCG64(seed))


def check_joint_pmf(game: GameSpec, pmf, tol: float = PMF_TOL) -> np.ndarray:
    p = np.asarray(pmf, dtype=float).reshape(-1)
    if p.size != game.num_actions:
        raise DimensionMismatch(f"pmf has {p.size} entries, game has {game.num_actions} joint actions")
    if np.any(p < -tol) or abs(p.sum() - 1.0) > tol:
        raise PmfNotNormalized(f"joint pmf is not on the simplex (sum {p.sum()!r})")
    return p


def check_policy(game: GameSpec, policy, tol: float = PMF_TOL) -> np.ndarray:
    """Validate a conditional policy array of shape ``(|Omega|, |A|)``."""
    P = np.asarray(policy, dtype=float)
    if P.shape != (game.num_events, game.num_actions):
        raise DimensionMismatch(
            f"policy has shape {P.shape}, expected {(game.num_events, game.num_actions)}"
        )
    if np.any(P < -tol):
        raise PmfNotNormalized("policy has negative entries")
    sums = P.sum(axis=1)
    live = game.pmf > 0
    bad = np.flatnonzero(live & (np.abs(sums - 1.0) > tol))
    if bad.size:
        raise PmfNotNormalized(f"policy row for event {bad[0]} sums to {sums[bad[0]]!r}")
    dead = np.flatnonzero(~live & (np.abs(sums) > tol))
    if dead.size:
        raise PmfNotNormalized(f"policy row for zero-probability event {dead[0]} is not zero")
    return P


def constant_policy(game: GameSpec, pmf) -> np.ndarray:
    """The policy that plays the same joint pmf under every possible event."""
    p = check_joint_pmf(game, pmf)
    P = np.tile(p, (game.num_events, 1))
    P[game.pmf == 0] = 0.0
    return P


def fig1_game() -> GameSpec:
    """The two-player static example: three actions against two."""
    return validate_game(
        {
            "players": ("p1", "p2"),
            "actions": (("alpha", "beta", "gamma"), ("alpha", "beta")),
            "utilities": [
                [[2, 5], [4, 2], [3, 5]],
                [[50, 1], [2, 4], [3, 0]],
            ],
        }
    )


def random_game(
    rng: np.random.Generator,
    actions: Sequence[int],
    events: Sequence[int],
    scale: float = 10.0,
    integer: bool = False,
) -> GameSpec:
    """Random game with uniform utilities on ``[0, scale]`` and a random full-support pmf.

    ``events`` lists the alphabet sizes of all ``N + 1`` components.
    """
    n = len(actions)
    shape = (n,) + tuple(actions) + tuple(events)
    if integer:
        util = rng.integers(0, int(scale) + 1, size=shape).astype(float)
    else:
        util = rng.uniform(0.0, scale, size=shape)
    w = rng.uniform(0.2, 1.0, size=tuple(events))
    w = w / w.sum()
    # renormalise exactly onto the simplex after rounding error
    w.reshape(-1)[-1] = 1.0 - (w.reshape(-1)[:-1].sum())
    return validate_game(
        {
            "actions": [[f"a{k}" for k in range(m)] for m in actions],
            "events": [[f"w{k}" for k in range(m)] for m in events],
            "pmf": w,
            "utilities": util,
        }
    )
