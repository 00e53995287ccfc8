"""Concave fairness functions over the utility box."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

KINDS = ("weighted-log", "linear", "min-with-cap")


@dataclass(frozen=True)
class FairnessFunction:
    """One of three concave objectives.

    ``weighted-log``: sum of ``w_i * log(1 + u_i)``;
    ``linear``: sum of ``w_i * u_i``;
    ``min-with-cap``: ``min(u_1, ..., u_N, cap)``.
    """

    kind: str
    weights: tuple[float, ...] = ()
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fairness kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "min-with-cap":
            if self.cap is None or not self.cap > 0:
                raise ValueError("min-with-cap needs a cap > 0")
        else:
            if not self.weights:
                raise ValueError(f"{self.kind} needs per-player weights")
            if any(w < 0 for w in self.weights):
                raise ValueError("fairness weights must be nonnegative")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def weighted_log(cls, weights) -> FairnessFunction:
        return cls("weighted-log", tuple(weights))

    @classmethod
    def linear(cls, weights) -> FairnessFunction:
        return cls("linear", tuple(weights))

    @classmethod
    def min_with_cap(cls, cap: float) -> FairnessFunction:
        return cls("min-with-cap", cap=float(cap))

    @property
    def smooth(self) -> bool:
        return self.kind != "min-with-cap"

    def _w(self, n):
        if len(self.weights) != n:
            raise ValueError(f"fairness has {len(self.weights)} weights for {n} players")
        return np.asarray(self.weights)

    def __call__(self, u) -> np.ndarray | float:
        """Evaluate along the last axis of ``u``."""
        u = np.asarray(u, dtype=float)
        n = u.shape[-1]
        if self.kind == "weighted-log":
            out = np.log1p(u) @ self._w(n)
        elif self.kind == "linear":
            out = u @ self._w(n)
        else:
            out = np.minimum(u.min(axis=-1), self.cap)
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, u) -> np.ndarray:
        """Gradient for the smooth kinds, a supergradient for ``min-with-cap``."""
        u = np.asarray(u, dtype=float)
        n = u.shape[-1]
        if self.kind == "weighted-log":
            return self._w(n) / (1.0 + u)
        if self.kind == "linear":
            return np.broadcast_to(self._w(n), u.shape).copy()
        g = np.zeros_like(u)
        if u.min() < self.cap:
            g[int(np.argmin(u))] = 1.0
        return g

    def max_over_box(self, caps) -> float:
        """Maximum over the box ``[0, caps]``; every kind is nondecreasing."""
        caps = np.asarray(caps, dtype=float)
        return float(self(caps))

    def describe(self) -> str:
        if self.kind == "min-with-cap":
            return f"min(u1..uN, {self.cap!r})"
        terms = []
        for i, w in enumerate(self.weights, start=1):
            body = f"log(1+u{i})" if self.kind == "weighted-log" else f"u{i}"
            terms.append(body if w == 1.0 else f"{w!r}*{body}")
        return "+".join(terms)

    def to_dict(self) -> dict:
        if self.kind == "min-with-cap":
            return {"kind": self.kind, "cap": self.cap}
        return {"kind": self.kind, "weights": list(self.weights)}


_NUM = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_LOG_TERM = re.compile(rf"^(?:({_NUM})\*)?log\(1\+u([0-9]+)\)$")
_LIN_TERM = re.compile(rf"^(?:({_NUM})\*)?u([0-9]+)$")
_MIN = re.compile(rf"^min\(((?:u[0-9]+,)+)({_NUM})\)$")
_TOP_PLUS = re.compile(r"\+(?![^()]*\))")


def parse_fairness(text: str, num_players: int) -> FairnessFunction:
    """Recognise the three supported shapes written out, nothing more.

    Accepted: ``10*log(1+u1)+log(1+u2)``, ``u2`` or ``2*u1+u2``, and
    ``min(u1,u2,3)``.  Players missing from a sum get weight 0.
    """
    s = text.replace(" ", "")
    m = _MIN.match(s)
    if m:
        players = [int(p[1:]) for p in m.group(1).rstrip(",").split(",")]
        if sorted(players) != list(range(1, num_players + 1)):
            raise ValueError(f"min(...) must list every player u1..u{num_players} once")
        return FairnessFunction.min_with_cap(float(m.group(2)))
    terms = _TOP_PLUS.split(s)
    for kind, pattern in (("weighted-log", _LOG_TERM), ("linear", _LIN_TERM)):
        matches = [pattern.match(t) for t in terms]
        if all(matches):
            weights = [0.0] * num_players
            for mt in matches:
                p = int(mt.group(2))
                if not 1 <= p <= num_players:
                    raise ValueError(f"no player u{p} in a {num_players}-player game")
                weights[p - 1] += float(mt.group(1)) if mt.group(1) else 1.0
            return FairnessFunction(kind, tuple(weights))
    raise ValueError(
        f"cannot read fairness {text!r}; expected a sum of w*log(1+ui), a sum of w*ui, "
        "or min(u1,...,uN,c)"
    )
