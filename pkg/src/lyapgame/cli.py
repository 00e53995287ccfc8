"""Command line front end: ``lyapgame <command> GAME [options]``.

``GAME`` is a game file path or ``@name`` for a bundled game (``@fig1``,
``@weather``).  Every command writes ``report.json`` plus CSV files (and
PNG figures unless ``--no-plots``) to ``--out``, defaulting to
``$LYAPGAME_OUT`` or ``./out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dpp, static, stochastic
from .errors import GameError, ParseError
from .fairness import FairnessFunction, parse_fairness
from .gamefile import fmt, load_game_file

OUT_ENV = "LYAPGAME_OUT"
EXIT_CODES = {"parse": 2, "validation": 3, "infeasible": 4, "size-cap": 5, "numerical": 6}


# ---------------------------------------------------------------- helpers


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return fmt(x)
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(x) for x in row])


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, (tuple, set)):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _floats(v):
    return [float(x) for x in np.asarray(v).reshape(-1)]


class Context:
    """Loaded game, resolved fairness and the output directory of one command."""

    def __init__(self, args):
        self.args = args
        doc = load_game_file(args.game)
        self.game = doc.game
        self.fairness, self.fairness_source = _resolve_fairness(args, doc.fairness, self.game.num_players)
        self.out = Path(args.out or os.environ.get(OUT_ENV) or "out")
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.plots = not getattr(args, "no_plots", False)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def action_labels(self, a: int):
        g = self.game
        return [g.action_labels[k][v] for k, v in enumerate(g.action_tuple(int(a)))]

    def event_labels(self, w: int):
        g = self.game
        return [g.event_labels[k][v] for k, v in enumerate(g.event_tuple(int(w)))]

    def action_header(self):
        return [f"a_{n}" for n in self.game.player_names]

    def event_header(self):
        return ["w_manager"] + [f"w_{n}" for n in self.game.player_names]

    def report(self, command: str, results: dict, config: dict | None = None):
        body = {
            "command": command,
            "argv": self.args.argv,
            "game": self.args.game,
            "fairness": self.fairness.to_dict(),
            "fairness_source": self.fairness_source,
            "config": config or {},
            "results": results,
            "files": sorted(self.files + ["report.json"]),
        }
        text = json.dumps(body, sort_keys=True, indent=2, default=_jsonable)
        (self.out / "report.json").write_text(text + "\n")
        return body


def _resolve_fairness(args, from_file, n):
    text = getattr(args, "fairness", None)
    kind = getattr(args, "fairness_kind", None)
    if text and kind:
        raise ValueError("give either --fairness or --fairness-kind, not both")
    if text:
        return parse_fairness(text, n), "flag"
    if kind:
        if kind == "min-with-cap":
            if args.cap is None:
                raise ValueError("--fairness-kind min-with-cap needs --cap")
            return FairnessFunction.min_with_cap(args.cap), "flag"
        weights = args.weights if args.weights else [1.0] * n
        return FairnessFunction(kind, tuple(weights)), "flag"
    if from_file is not None:
        return from_file, "file"
    return FairnessFunction.weighted_log([1.0] * n), "default"


# ---------------------------------------------------------------- commands


def cmd_validate(ctx: Context):
    g = ctx.game
    counts = {"stochastic": stochastic.constraint_counts(g)}
    if g.is_static:
        counts["static"] = {
            "cce": static.build_cce_constraints(g).count("deviation"),
            "ce": static.build_ce_constraints(g).count("deviation"),
        }
    results = {
        "players": list(g.player_names),
        "actions": [list(a) for a in g.action_labels],
        "events": [list(e) for e in g.event_labels],
        "caps": _floats(g.caps),
        "static": g.is_static,
        "constraint_counts": counts,
    }
    ctx.report("validate", results)
    print(f"valid: {g.num_players} players, {g.num_actions} joint actions, {g.num_events} joint events")


def cmd_solve_static(ctx: Context):
    g, kind = ctx.game, ctx.args.kind
    sol = static.optimize_static(g, ctx.fairness, kind)
    cert = static.certify(g, sol.pmf, kind, tol=static.SOLVER_TOL)
    write_csv(
        ctx.path("pmf.csv"),
        ctx.action_header() + ["probability"],
        [ctx.action_labels(a) + [sol.pmf[a]] for a in range(g.num_actions)],
    )
    results = {
        "utilities": _floats(sol.utilities),
        "value": sol.value,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "certification": cert.to_dict(),
    }
    ctx.report("solve-static", results, {"kind": kind})
    print("utilities: " + " ".join(fmt(u) for u in sol.utilities))


def cmd_solve_stochastic(ctx: Context):
    g, kind = ctx.game, ctx.args.kind
    sol = stochastic.optimize_stochastic(g, ctx.fairness, kind)
    cert = stochastic.certify_stochastic(g, sol.policy, kind, tol=static.SOLVER_TOL)
    _write_policy(ctx, "policy.csv", sol.policy)
    rows = []
    for i, th in enumerate(sol.theta):
        th = th.reshape(g.event_shape[i + 1], -1)
        for v in range(th.shape[0]):
            for c in range(th.shape[1]):
                sug = g.action_labels[i][c] if kind == "ce" else "*"
                rows.append([g.player_names[i], g.event_labels[i + 1][v], sug, th[v, c]])
    write_csv(ctx.path("theta.csv"), ["player", "event", "suggested", "theta"], rows)
    results = {
        "utilities": _floats(sol.utilities),
        "value": sol.value,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "certification": cert.to_dict(),
        "constraint_counts": stochastic.constraint_counts(g),
    }
    ctx.report("solve-stochastic", results, {"kind": kind})
    print("utilities: " + " ".join(fmt(u) for u in sol.utilities))


def _write_policy(ctx, name, P):
    g = ctx.game
    rows = []
    for w in range(g.num_events):
        for a in range(g.num_actions):
            rows.append(ctx.event_labels(w) + ctx.action_labels(a) + [P[w, a]])
    write_csv(ctx.path(name), ctx.event_header() + ctx.action_header() + ["probability"], rows)


def _read_table(ctx, path, with_events):
    g = ctx.game
    header = ctx.event_header() if with_events else []
    header = header + ctx.action_header() + ["probability"]
    shape = (g.num_events, g.num_actions) if with_events else (g.num_actions,)
    out = np.zeros(shape)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ParseError(f"{path}: expected header {header}, got {got}", line=1)
        ne = len(g.event_shape) if with_events else 0
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields", line=lineno)
            try:
                a = g.action_index(tuple(row[ne:-1]))
                p = float(row[-1])
                if with_events:
                    out[g.event_index(tuple(row[:ne])), a] = p
                else:
                    out[a] = p
            except (GameError, ValueError) as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
    return out


def cmd_certify(ctx: Context):
    args, g = ctx.args, ctx.game
    if (args.pmf is None) == (args.policy is None):
        raise ValueError("give exactly one of --pmf or --policy")
    if args.pmf is not None:
        p = _read_table(ctx, args.pmf, with_events=False)
        rep = static.certify(g, p, args.kind, tol=args.tol)
        source = {"pmf": args.pmf}
    else:
        P = _read_table(ctx, args.policy, with_events=True)
        rep = stochastic.certify_stochastic(g, P, args.kind, tol=args.tol)
        source = {"policy": args.policy}
    ctx.report("certify", {"certification": rep.to_dict()}, {"kind": args.kind, "tol": args.tol, **source})
    status = "satisfied" if rep.satisfied else f"violated at {rep.violating}"
    print(f"{args.kind}: {status} (worst violation {fmt(rep.worst_violation)})")


def cmd_silhouette(ctx: Context):
    g, args = ctx.game, ctx.args
    dirs = static.silhouette_directions(args.directions)
    pts = static.polytope_silhouette(g, args.kind, dirs)
    hull = static.convex_hull(pts)
    write_csv(
        ctx.path("silhouette.csv"),
        ["k", "w1", "w2", "u1", "u2"],
        [[k, dirs[k, 0], dirs[k, 1], pts[k, 0], pts[k, 1]] for k in range(len(dirs))],
    )
    write_csv(ctx.path("hull.csv"), ["u1", "u2"], [[x, y] for x, y in hull])
    if ctx.plots:
        from . import plotting

        plotting.silhouette(pts, hull, ctx.path("silhouette.png"), f"{args.kind.upper()} utility region")
    ctx.report("silhouette", {"hull": hull.tolist()}, {"kind": args.kind, "directions": args.directions})
    print("hull: " + "; ".join(f"({fmt(x)}, {fmt(y)})" for x, y in hull))


def _engine_config(ctx, V=None):
    a = ctx.args
    return dpp.EngineConfig(
        ctx.fairness, float(a.V if V is None else V), int(a.T), int(a.seed), a.engine, a.stride
    )


def _summarize(traces, bounds, fairness, game):
    norm_t = np.mean([tr.norm for tr in traces], axis=0) / traces[0].t if len(traces[0].t) else np.zeros(0)
    phi = np.mean([tr.phi_gammabar(fairness) for tr in traces], axis=0) if len(traces[0].t) else np.zeros(0)
    env = bounds.envelope(traces[0].t) if len(traces[0].t) else np.zeros(0)
    final_phi = float(phi[-1]) if len(phi) else float("nan")
    return {
        "runs": len(traces),
        "final_phi_gammabar_mean": final_phi,
        "final_gap_mean": bounds.phi_star - final_phi,
        "final_ubar_mean": _floats(np.mean([tr.ubar[-1] for tr in traces], axis=0)) if len(phi) else [],
        "final_norm_over_T_mean": float(norm_t[-1]) if len(norm_t) else 0.0,
        "envelope_at_T": float(env[-1]) if len(env) else 0.0,
        "lower_bound_ok": bool(final_phi >= bounds.utility_lower_bound) if len(phi) else True,
        "envelope_ok": bool(np.all(norm_t <= env)),
        "max_jensen_gap": max((float(np.max(dpp.jensen_gap(tr, fairness), initial=-np.inf)) for tr in traces), default=0.0),
        "max_time_average_violation": max(dpp.time_average_violation(tr, game) for tr in traces),
    }, norm_t, phi, env


def cmd_run_dpp(ctx: Context):
    args, g = ctx.args, ctx.game
    config = _engine_config(ctx)
    seeds = [config.seed + k for k in range(args.seeds)]
    traces = dpp.run_batch(g, config, seeds=seeds)
    bounds = dpp.theorem_bounds(g, config, trace=traces[0])
    summary, norm_t, phi, env = _summarize(traces, bounds, ctx.fairness, g)
    _write_trace(ctx, "trace.csv", traces[0])
    if len(traces) > 1:
        rows = [
            [tr.seed, float(ctx.fairness(tr.gammabar[-1])), tr.norm[-1] / tr.T] + list(tr.ubar[-1])
            for tr in traces
            if len(tr.t)
        ]
        header = ["seed", "phi_gammabar", "norm_over_T"] + [f"ubar_{n}" for n in g.player_names]
        write_csv(ctx.path("runs.csv"), header, rows)
    if ctx.plots and len(norm_t):
        from . import plotting

        plotting.trace(traces[0].t, norm_t, env, phi, bounds.phi_star, bounds.utility_lower_bound, ctx.path("trace.png"))
    results = {"bounds": bounds.to_dict(), **summary}
    ctx.report("run-dpp", results, {**config.to_dict(), "seeds": seeds})
    print(
        f"phi(gammabar) = {fmt(summary['final_phi_gammabar_mean'])}, "
        f"lower bound {fmt(bounds.utility_lower_bound)}, ||X(T)||/T = {fmt(summary['final_norm_over_T_mean'])}"
    )


def _write_trace(ctx, name, tr):
    g = ctx.game
    N = g.num_players
    names = g.player_names
    general = tr.variant == "general"
    header = ["t"] + ctx.event_header() + ctx.action_header()
    header += [f"gamma_{n}" for n in names] + ["theta"] + [f"u_{n}" for n in names]
    header += [f"Z_{n}" for n in names]
    if general:
        header += [f"Q_{n}" for n in names] + [f"sumJ_{n}" for n in names]
    else:
        header += [f"Q_{names[i]}^{b}" for i in range(N) for b in g.action_labels[i]]
    header += ["norm"] + [f"ubar_{n}" for n in names] + ["gbar"]
    jsizes = [g.event_shape[i + 1] * g.action_shape[i] for i in range(N)]
    jcuts = np.cumsum([0] + jsizes)
    rows = []
    for k, t in enumerate(tr.t):
        w, a = int(tr.omega[t - 1]), int(tr.alpha[t - 1])
        ev = g.event_tuple(w)
        theta = ";".join(
            f"{names[i]}:{g.event_labels[i + 1][ev[i + 1]]}={fmt(tr.theta[k, i])}"
            for i in range(N)
            if tr.theta[k, i] != 0
        )
        x = tr.queues[k]
        if general:
            J = x[2 * N :]
            qcols = list(x[: 2 * N]) + [J[jcuts[i] : jcuts[i + 1]].sum() for i in range(N)]
        else:
            qcols = list(x)
        rows.append(
            [int(t)] + ctx.event_labels(w) + ctx.action_labels(a) + list(tr.gamma[k]) + [theta]
            + list(tr.u[k]) + qcols + [tr.norm[k]] + list(tr.ubar[k]) + [tr.gbar[k]]
        )
    write_csv(ctx.path(name), header, rows)


def _sweep_point(game, config, V, seeds):
    traces = dpp.run_batch(game, config, seeds=seeds, Vs=[V] * len(seeds))
    cfg = dpp.EngineConfig(config.fairness, V, config.T, config.seed, config.variant, config.stride)
    bounds = dpp.theorem_bounds(game, cfg, trace=traces[0])
    summary, *_ = _summarize(traces, bounds, config.fairness, game)
    return V, bounds, summary


def cmd_sweep_v(ctx: Context):
    args, g = ctx.args, ctx.game
    base = _engine_config(ctx, V=args.V[0])
    seeds = [base.seed + k for k in range(args.seeds)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            points = list(pool.map(_sweep_point, [g] * len(args.V), [base] * len(args.V), args.V, [seeds] * len(args.V)))
    else:
        points = [_sweep_point(g, base, V, seeds) for V in args.V]
    header = ["V", "phi_gammabar_mean", "gap", "B_over_V", "lower_bound", "norm_over_T_mean", "envelope_T"]
    header += [f"ubar_{n}" for n in g.player_names]
    rows, table = [], []
    for V, b, s in points:
        row = [float(V), s["final_phi_gammabar_mean"], s["final_gap_mean"], b.B / V if V > 0 else float("inf"),
               b.utility_lower_bound, s["final_norm_over_T_mean"], s["envelope_at_T"]] + s["final_ubar_mean"]
        rows.append(row)
        table.append({"V": float(V), "bounds": b.to_dict(), **s})
    write_csv(ctx.path("sweep.csv"), header, rows)
    gaps = [r[2] for r in rows]
    if ctx.plots and rows:
        from . import plotting

        plotting.sweep([r[0] for r in rows], gaps, [r[3] for r in rows], [r[5] for r in rows], [r[6] for r in rows], ctx.path("sweep.png"))
    results = {"points": table, "gap_decreasing_in_V": bool(all(a > b for a, b in zip(gaps, gaps[1:])))}
    cfg = base.to_dict()
    cfg.update({"V": [float(v) for v in args.V], "seeds": seeds})
    ctx.report("sweep-v", results, cfg)
    for r in rows:
        print(f"V={fmt(r[0])}: phi(gammabar)={fmt(r[1])} gap={fmt(r[2])} ||X(T)||/T={fmt(r[5])}")


def cmd_extract_policy(ctx: Context):
    g = ctx.game
    config = _engine_config(ctx)
    tr = dpp.run(g, config)
    P = dpp.extract_empirical_policy(tr, g)
    _write_policy(ctx, "policy.csv", P)
    certs = {}
    for kind in ("cce", "ce"):
        rep = stochastic.certify_stochastic(g, P, kind, tol=ctx.args.tol)
        certs[kind] = rep.to_dict()
    results = {
        "certification": certs,
        "max_cap": float(np.max(g.caps)),
        "relative_cce_violation": certs["cce"]["worst_violation"] / float(np.max(g.caps)) if np.max(g.caps) > 0 else 0.0,
    }
    ctx.report("extract-policy", results, config.to_dict())
    print(f"empirical policy: worst CCE deviation gain {fmt(certs['cce']['worst_violation'])}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyapgame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fairness=True):
        p.add_argument("game", help="game file path, or @name for a bundled game")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
        if fairness:
            p.add_argument("--fairness", help="e.g. '10*log(1+u1)+log(1+u2)', '2*u1+u2', 'min(u1,u2,3)'")
            p.add_argument("--fairness-kind", choices=("weighted-log", "linear", "min-with-cap"))
            p.add_argument("--weights", type=float, nargs="+")
            p.add_argument("--cap", type=float)

    def engine(p, multi_v=False):
        if multi_v:
            p.add_argument("--V", type=float, nargs="+", default=[50.0, 100.0, 200.0])
        else:
            p.add_argument("--V", type=float, default=100.0)
        p.add_argument("--T", type=int, default=10_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--engine", choices=dpp.VARIANTS, default="general")
        p.add_argument("--stride", type=int, help="record every n-th slot")

    p = sub.add_parser("validate", help="check a game file and report constraint counts")
    common(p, fairness=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve-static", help="maximize fairness over the static CE/CCE polytope")
    common(p)
    p.add_argument("--kind", choices=("ce", "cce"), default="cce")
    p.set_defaults(func=cmd_solve_static)

    p = sub.add_parser("solve-stochastic", help="maximize fairness over the stochastic CE/CCE system")
    common(p)
    p.add_argument("--kind", choices=("ce", "cce"), default="cce")
    p.set_defaults(func=cmd_solve_stochastic)

    p = sub.add_parser("certify", help="certify a pmf (static) or policy (stochastic) CSV")
    common(p, fairness=False)
    p.add_argument("--kind", choices=("ne", "ce", "cce"), default="cce")
    p.add_argument("--pmf")
    p.add_argument("--policy")
    p.add_argument("--tol", type=float, default=static.EXACT_TOL)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("silhouette", help="sweep LP directions over a two-player polytope")
    common(p, fairness=False)
    p.add_argument("--kind", choices=("ce", "cce"), default="cce")
    p.add_argument("--directions", type=int, default=64)
    p.set_defaults(func=cmd_silhouette)

    p = sub.add_parser("run-dpp", help="simulate the online game manager")
    common(p)
    engine(p)
    p.add_argument("--seeds", type=int, default=1, help="number of seeded runs to average")
    p.set_defaults(func=cmd_run_dpp)

    p = sub.add_parser("sweep-v", help="run the game manager across a grid of V values")
    common(p)
    engine(p, multi_v=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep_v)

    p = sub.add_parser("extract-policy", help="empirical policy of an online run, certified")
    common(p)
    engine(p)
    p.add_argument("--tol", type=float, default=static.EXACT_TOL)
    p.set_defaults(func=cmd_extract_policy)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        if getattr(args, "seeds", 1) < 1:
            raise ValueError("--seeds must be >= 1")
        args.func(Context(args))
    except GameError as exc:
        return _fail(exc.category, exc)
    except ValueError as exc:
        return _fail("validation", exc)
    return 0


def _fail(category, exc) -> int:
    print(json.dumps({"error": category, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return EXIT_CODES.get(category, 1)


if __name__ == "__main__":
    sys.exit(main())
