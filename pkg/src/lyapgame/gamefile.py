"""Line-based game file format.

::

    # comments start with '#'
    [players]
    p1 = alpha beta gamma
    p2 = alpha beta

    [events]                 # optional; missing components are singletons
    manager = calm busy
    p1 = lo hi

    [pmf]                    # optional when every event alphabet is a singleton
    product                  # then one line per non-singleton component ...
    manager = 0.5 0.5
    p1 = 0.3 0.7
    # ... or sparse joint entries instead of 'product':
    # calm lo _ = 0.25

    [utilities]
    default = 0
    p1: alpha alpha = 2              # event part omitted: applies to every event
    p1: * beta | busy * _ = 3        # '*' matches any label; later lines win

    [caps]                   # optional
    p1 = 5

    [fairness]               # optional
    kind = weighted-log
    weights = 10 1

Singleton components carry the label ``_``.  Numbers are written with 17
significant digits so a dump parses back to an equal game.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError
from .fairness import FairnessFunction
from .game import SINGLETON, GameSpec, validate_game

SECTIONS = ("players", "events", "pmf", "utilities", "caps", "fairness")
MANAGER = "manager"
_TOKEN = re.compile(r"^[A-Za-z0-9_.+\-]+$")


@dataclass
class GameDocument:
    game: GameSpec
    fairness: FairnessFunction | None = None


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _number(text, line, section):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", line, section) from None


def _split_sections(text):
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = re.fullmatch(r"\[([a-z]+)\]", body)
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise ParseError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ParseError(f"section [{current}] appears twice", lineno)
            sections[current] = []
            continue
        if current is None:
            raise ParseError("content before the first section header", lineno)
        sections[current].append((lineno, body))
    return sections


def _key_value(lineno, body, section):
    if "=" not in body:
        raise ParseError(f"expected 'key = value', got {body!r}", lineno, section)
    key, value = body.split("=", 1)
    return key.strip(), value.split()


def _labels(tokens, lineno, section):
    for tok in tokens:
        if not _TOKEN.match(tok):
            raise ParseError(f"invalid label {tok!r}", lineno, section)
    return tokens


def parse_game_text(text: str) -> GameDocument:
    sections = _split_sections(text)
    if "players" not in sections:
        raise ParseError("missing [players] section")

    names, actions = [], []
    for lineno, body in sections["players"]:
        key, labels = _key_value(lineno, body, "players")
        if key == MANAGER or not _TOKEN.match(key):
            raise ParseError(f"invalid player name {key!r}", lineno, "players")
        if key in names:
            raise ParseError(f"player {key!r} declared twice", lineno, "players")
        names.append(key)
        actions.append(_labels(labels, lineno, "players"))
    if not names:
        raise ParseError("no players declared", section="players")
    components = [MANAGER] + names

    events = [[SINGLETON] for _ in components]
    for lineno, body in sections.get("events", []):
        key, labels = _key_value(lineno, body, "events")
        if key not in components:
            raise ParseError(f"unknown event component {key!r}", lineno, "events")
        events[components.index(key)] = _labels(labels, lineno, "events")

    pmf = _parse_pmf(sections.get("pmf"), components, events)
    utilities = _parse_utilities(sections.get("utilities", []), names, actions, events)

    caps = None
    if "caps" in sections:
        caps = [None] * len(names)
        for lineno, body in sections["caps"]:
            key, vals = _key_value(lineno, body, "caps")
            if key not in names or len(vals) != 1:
                raise ParseError(f"expected '<player> = <cap>', got {body!r}", lineno, "caps")
            caps[names.index(key)] = _number(vals[0], lineno, "caps")
        if any(c is None for c in caps):
            raise ParseError("a cap is needed for every player", section="caps")

    raw = {"players": names, "actions": actions, "events": events, "utilities": utilities}
    if pmf is not None:
        raw["pmf"] = pmf
    if caps is not None:
        raw["caps"] = caps
    game = validate_game(raw)
    fairness = _parse_fairness(sections.get("fairness"), len(names))
    return GameDocument(game, fairness)


def _parse_pmf(lines, components, events):
    if lines is None:
        return None
    shape = tuple(len(e) for e in events)
    if lines and lines[0][1] == "product":
        parts = [np.ones(1) if len(e) == 1 else None for e in events]
        for lineno, body in lines[1:]:
            key, vals = _key_value(lineno, body, "pmf")
            if key not in components:
                raise ParseError(f"unknown event component {key!r}", lineno, "pmf")
            k = components.index(key)
            if len(vals) != shape[k]:
                raise ParseError(
                    f"component {key!r} needs {shape[k]} probabilities, got {len(vals)}", lineno, "pmf"
                )
            parts[k] = np.array([_number(v, lineno, "pmf") for v in vals])
        missing = [components[k] for k, p in enumerate(parts) if p is None]
        if missing:
            raise ParseError(f"product pmf is missing components {missing}", section="pmf")
        return {"product": parts}
    dense = np.zeros(shape)
    for lineno, body in lines:
        key, vals = _key_value(lineno, body, "pmf")
        labels = key.split()
        if len(labels) != len(shape) or len(vals) != 1:
            raise ParseError(
                f"expected {len(shape)} event labels and one probability, got {body!r}", lineno, "pmf"
            )
        idx = []
        for k, lab in enumerate(labels):
            if lab not in events[k]:
                raise ParseError(f"unknown label {lab!r} for component {components[k]!r}", lineno, "pmf")
            idx.append(events[k].index(lab))
        dense[tuple(idx)] += _number(vals[0], lineno, "pmf")
    return dense


def _match(pattern, alphabet, lineno, what):
    if pattern == "*":
        return list(range(len(alphabet)))
    if pattern not in alphabet:
        raise ParseError(f"unknown {what} label {pattern!r}", lineno, "utilities")
    return [alphabet.index(pattern)]


def _parse_utilities(lines, names, actions, events):
    n = len(names)
    a_shape = tuple(len(a) for a in actions)
    e_shape = tuple(len(e) for e in events)
    default = 0.0
    table = None
    for lineno, body in lines:
        if body.startswith("default"):
            key, vals = _key_value(lineno, body, "utilities")
            if key != "default" or len(vals) != 1:
                raise ParseError(f"malformed default row {body!r}", lineno, "utilities")
            if table is not None:
                raise ParseError("'default' must precede the utility entries", lineno, "utilities")
            default = _number(vals[0], lineno, "utilities")
            continue
        if table is None:
            table = np.full((n,) + a_shape + e_shape, default)
        m = re.fullmatch(r"([^:]+):([^=|]*)(?:\|([^=]*))?=(.*)", body)
        if not m:
            raise ParseError(
                f"malformed utility row {body!r}; expected '<player>: <actions> [| <events>] = <value>'",
                lineno,
                "utilities",
            )
        player = m.group(1).strip()
        if player not in names:
            raise ParseError(f"unknown player {player!r}", lineno, "utilities")
        acts = m.group(2).split()
        evs = m.group(3).split() if m.group(3) is not None else ["*"] * len(e_shape)
        vals = m.group(4).split()
        if len(acts) != n:
            raise ParseError(f"expected {n} action labels, got {len(acts)}", lineno, "utilities")
        if len(evs) != len(e_shape):
            raise ParseError(f"expected {len(e_shape)} event labels, got {len(evs)}", lineno, "utilities")
        if len(vals) != 1:
            raise ParseError("expected exactly one value", lineno, "utilities")
        value = _number(vals[0], lineno, "utilities")
        axes = [_match(a, actions[k], lineno, "action") for k, a in enumerate(acts)]
        axes += [_match(e, events[k], lineno, "event") for k, e in enumerate(evs)]
        i = names.index(player)
        for idx in itertools.product(*axes):
            table[(i,) + idx] = value
    if table is None:
        table = np.full((n,) + a_shape + e_shape, default)
    return table


def _parse_fairness(lines, n):
    if not lines:
        return None
    fields = {}
    for lineno, body in lines:
        key, vals = _key_value(lineno, body, "fairness")
        fields[key] = (lineno, vals)
    if "kind" not in fields:
        raise ParseError("missing 'kind'", section="fairness")
    lineno, vals = fields["kind"]
    kind = " ".join(vals)
    try:
        if kind == "min-with-cap":
            if "cap" not in fields:
                raise ParseError("min-with-cap needs 'cap'", lineno, "fairness")
            cl, cv = fields["cap"]
            return FairnessFunction.min_with_cap(_number(cv[0], cl, "fairness"))
        if "weights" not in fields:
            raise ParseError(f"{kind} needs 'weights'", lineno, "fairness")
        wl, wv = fields["weights"]
        if len(wv) != n:
            raise ParseError(f"expected {n} weights, got {len(wv)}", wl, "fairness")
        return FairnessFunction(kind, tuple(_number(w, wl, "fairness") for w in wv))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), lineno, "fairness") from None


def bundled_game_path(name: str) -> Path:
    """Path of a game file shipped with the package (``fig1`` for the two-player example)."""
    ref = resources.files("lyapgame") / "games" / f"{name}.game"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled game named {name!r}")
    return Path(str(ref))


def resolve_game_path(spec: str) -> Path:
    """``@name`` selects a bundled game; anything else is a filesystem path."""
    return bundled_game_path(spec[1:]) if spec.startswith("@") else Path(spec)


def load_game_file(path) -> GameDocument:
    path = resolve_game_path(str(path))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_game_text(text)


def parse_game_file(path) -> GameSpec:
    return load_game_file(path).game


def dump_game(game: GameSpec, fairness: FairnessFunction | None = None) -> str:
    """Serialize ``game`` losslessly (sparse pmf, nonzero utilities only)."""
    lines = ["[players]"]
    for name, acts in zip(game.player_names, game.action_labels):
        lines.append(f"{name} = {' '.join(acts)}")
    components = [MANAGER] + list(game.player_names)
    lines += ["", "[events]"]
    for comp, labels in zip(components, game.event_labels):
        lines.append(f"{comp} = {' '.join(labels)}")
    lines += ["", "[pmf]"]
    for w in np.flatnonzero(game.pmf):
        labels = [game.event_labels[k][v] for k, v in enumerate(game.event_tuple(int(w)))]
        lines.append(f"{' '.join(labels)} = {fmt(game.pmf[w])}")
    lines += ["", "[utilities]", "default = 0"]
    for i, name in enumerate(game.player_names):
        for a in range(game.num_actions):
            alabels = [game.action_labels[k][v] for k, v in enumerate(game.action_tuple(a))]
            for w in range(game.num_events):
                value = game.utilities[i, a, w]
                if value == 0:
                    continue
                elabels = [game.event_labels[k][v] for k, v in enumerate(game.event_tuple(w))]
                lines.append(f"{name}: {' '.join(alabels)} | {' '.join(elabels)} = {fmt(value)}")
    lines += ["", "[caps]"]
    for name, cap in zip(game.player_names, game.caps):
        lines.append(f"{name} = {fmt(cap)}")
    if fairness is not None:
        lines += ["", "[fairness]", f"kind = {fairness.kind}"]
        if fairness.kind == "min-with-cap":
            lines.append(f"cap = {fmt(fairness.cap)}")
        else:
            lines.append(f"weights = {' '.join(fmt(w) for w in fairness.weights)}")
    return "\n".join(lines) + "\n"
