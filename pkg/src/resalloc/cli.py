"""Command-line entry point: ``resalloc <command> [options]``.

Every command writes plain tab-separated text: ``#`` metadata lines holding
the resolved configuration as JSON, one header row, then data rows.
Exit codes: 0 success, 1 runtime safety violation, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .model import ScenarioError, SystemModel, load_scenario
from .multipliers import FixedPointTrace, fixed_point_iteration, xi_star_ranking
from .policy import KINDS, PolicySpec
from .relaxed import priority_policy, rank_pairs
from .simulator import BACKEND, SafetyViolation, SimConfig, default_horizon, simulate, sweep_h

REPRODUCE_H = {"fig1a": [1, 5, 10, 20, 50, 100], "fig1b": [1, 5, 10, 20, 50, 100],
               "fig2": [1, 5, 10, 20, 50]}
ALL_POLICIES = ["index:eps=0.01", "index:eps=0", "max-reward", "min-cost", "random"]


class UsageError(Exception):
    pass


def parse_policy(text: str) -> tuple[str, float]:
    """``index:eps=0.01`` -> ("index", 0.01); baselines carry eps 0."""
    if text.startswith("index"):
        eps = 0.0
        if ":" in text:
            key, _, val = text.split(":", 1)[1].partition("=")
            if key != "eps" or not val:
                raise UsageError(f"bad policy {text!r}; expected index:eps=<value>")
            try:
                eps = float(val)
            except ValueError:
                raise UsageError(f"bad eps value in {text!r}") from None
        return "index", eps
    if text not in KINDS:
        raise UsageError(f"unknown policy {text!r}; choose from {', '.join(ALL_POLICIES)}")
    return text, 0.0


def parse_gamma(text: str | None, model: SystemModel) -> np.ndarray:
    J = model.num_pools
    if text is None:
        return np.zeros(J)
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse gamma {text!r}") from None
    if len(vals) == 1:
        vals = vals * J
    if len(vals) != J:
        raise UsageError(f"gamma needs 1 or {J} values, got {len(vals)}")
    g = np.array(vals)
    if np.any(g < 0):
        raise UsageError("gamma must be nonnegative")
    return g


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return ",".join(_fmt(v) for v in x)
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


class Table:
    def __init__(self, meta: dict, columns: list[str]):
        self.meta = meta
        self.columns = columns
        self.rows = []

    def add(self, *values):
        self.rows.append([_fmt(v) for v in values])

    def render(self) -> str:
        lines = [f"# {k}: {json.dumps(_jsonable(v))}" for k, v in self.meta.items()]
        lines.append("\t".join(self.columns))
        lines.extend("\t".join(r) for r in self.rows)
        return "\n".join(lines) + "\n"


def _emit(tables: list[Table], out: str | None):
    text = "\n".join(t.render() for t in tables)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _meta(args, **extra) -> dict:
    meta = {"resalloc": __version__, "command": args.command}
    meta.update({k: v for k, v in vars(args).items() if k not in ("command", "func")})
    meta.update(extra)
    return meta


def _sim_config(args, model: SystemModel, h: int = 1) -> SimConfig:
    return SimConfig(h=h, horizon=args.horizon, warmup=args.warmup, seed=args.seed,
                     target=args.ci_target, reps_initial=args.reps_initial,
                     reps_max=args.reps_max)


def _trace(model: SystemModel, args) -> FixedPointTrace:
    return fixed_point_iteration(model, parse_gamma(args.gamma0, model), args.damping,
                                 args.max_iter)


def _reference(model: SystemModel, args):
    """Fixed-point ranking o_{k*} and its asymptotic revenue R(o_{k*})."""
    trace = _trace(model, args)
    o = trace.ranking_star
    return trace, o, priority_policy(model, o, trace.gamma_star).revenue


def _policies(args, ranking) -> list[PolicySpec]:
    specs = []
    for text in args.policy or ALL_POLICIES:
        kind, eps = parse_policy(text)
        specs.append(PolicySpec.index(ranking, eps) if kind == "index" else PolicySpec(kind))
    return specs


# commands

def cmd_solve_relaxed(args) -> list[Table]:
    model = load_scenario(args.scenario)
    gamma = parse_gamma(args.gamma, model)
    if args.ranking == "xi-star":
        o = xi_star_ranking(model)
    else:
        o = rank_pairs(model, gamma)
    sol = priority_policy(model, o, gamma)
    occ = sol.occupancy(model)
    meta = _meta(args, revenue=sol.revenue, nu=sol.nu, gamma=gamma,
                 critical=[[p, i, n, j] for p, i, n, j in sol.critical],
                 pattern_order=o.pattern_order())
    t1 = Table(meta, ["request_type", "nu", "throughput", "blocking"])
    for rt in range(model.num_request_types):
        t1.add(rt, sol.nu[rt], sol.throughput[rt], sol.blocking(model)[rt])
    t2 = Table({"section": "patterns"}, ["pattern", "request_type", "dummy", "occupancy",
                                        "critical_pool"])
    crit = {i: j for _, i, _, j in sol.critical}
    for i in range(model.num_patterns):
        t2.add(i, model.owner[i], bool(model.dummy[i]), occ[i], crit.get(i, "-"))
    t3 = Table({"section": "pools"}, ["pool", "usage", "capacity", "saturated"])
    for j in range(model.num_pools):
        t3.add(j, sol.pool_usage[j], model.capacities[j], bool(sol.saturated[j]))
    return [t1, t2, t3]


def cmd_fixed_point(args) -> list[Table]:
    model = load_scenario(args.scenario)
    trace = _trace(model, args)
    meta = _meta(args, k_star=trace.k_star, decomposable=trace.decomposable,
                 certified=trace.certified,
                 gamma_star=trace.gamma_star,
                 candidate=None if trace.candidate is None else trace.candidate,
                 clipped_reorder=trace.clipped_reorder)
    t = Table(meta, ["k", "residual", "revenue", "gamma"])
    for k, g in enumerate(trace.gammas):
        res = trace.residuals[k - 1] if k > 0 else float("nan")
        t.add(k, res, trace.revenues[k], g)
    return [t]


def _sweep_table(model, args, hs, specs, R, extra_meta) -> Table:
    cfg = _sim_config(args, model)
    meta = _meta(args, backend=BACKEND, reference_revenue=R,
                 horizon_used=args.horizon or default_horizon(model),
                 ramp="linear", **extra_meta)
    cols = ["scenario", "policy", "eps_m", "h", "revenue", "ci_half", "ref_revenue", "rel_gap"]
    cols += [f"blocking_{r}" for r in range(model.num_request_types)]
    cols += ["replications", "seed", "ci_met"]
    t = Table(meta, cols)
    for row in sweep_h(model, specs, hs, cfg, R):
        t.add(model.name, row.policy, row.eps_m, row.h, row.revenue, row.ci_half,
              row.ref_revenue, row.rel_gap, *row.blocking, row.replications, row.seed,
              row.ci_met)
    return t


def cmd_simulate(args) -> list[Table]:
    if not args.h:
        raise UsageError("at least one --h is required")
    model = load_scenario(args.scenario)
    trace, o, R = _reference(model, args)
    return [_sweep_table(model, args, args.h, _policies(args, o), R,
                         {"k_star": trace.k_star, "decomposable": trace.decomposable})]


def cmd_reproduce(args) -> list[Table]:
    name = args.figure
    if name == "fig2b":
        return _reproduce_fig2b(args)
    model = load_scenario(name)
    trace, o, R = _reference(model, args)
    hs = args.h or REPRODUCE_H[name]
    return [_sweep_table(model, args, hs, _policies(args, o), R,
                         {"k_star": trace.k_star, "decomposable": trace.decomposable})]


def _reproduce_fig2b(args) -> list[Table]:
    """Per-iteration table on fig2: R(o_k) and simulated revenues at one h."""
    model = load_scenario("fig2")
    trace = _trace(model, args)
    h = (args.h or [50])[0]
    cfg = _sim_config(args, model, h)
    base = {kind: simulate(model, PolicySpec(kind), cfg).revenue
            for kind in ("max-reward", "min-cost", "random")}
    meta = _meta(args, backend=BACKEND, h_used=h, k_star=trace.k_star, baselines=base)
    t = Table(meta, ["k", "R_ok", "index_eps0.01", "index_eps0", "max_reward", "min_cost",
                     "random", "gap_index_eps0.01", "gap_index_eps0"])
    for k, (g, o) in enumerate(zip(trace.gammas, trace.rankings)):
        Rk = priority_policy(model, o, g).revenue
        r1 = simulate(model, PolicySpec.index(o, 0.01), cfg).revenue
        r0 = simulate(model, PolicySpec.index(o, 0.0), cfg).revenue
        t.add(k, Rk, r1, r0, base["max-reward"], base["min-cost"], base["random"],
              (Rk - r1) / Rk, (Rk - r0) / Rk)
    return [t]


def _add_fixed_point_opts(p):
    p.add_argument("--gamma0", default=None, help="initial multipliers: one value or J comma-separated")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=50)


def _add_sim_opts(p):
    p.add_argument("--policy", action="append",
                   help="repeatable: index:eps=<x>, max-reward, min-cost, random")
    p.add_argument("--h", action="append", type=int, help="repeatable scaling parameter")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--warmup", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ci-target", type=float, default=0.03)
    p.add_argument("--reps-initial", type=int, default=4)
    p.add_argument("--reps-max", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resalloc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-relaxed", help="fluid priority policy at given multipliers")
    p.add_argument("--scenario", required=True)
    p.add_argument("--gamma", default=None)
    p.add_argument("--ranking", choices=["index", "xi-star"], default="index")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_relaxed)

    p = sub.add_parser("fixed-point", help="damped multiplier search")
    p.add_argument("scenario_pos", nargs="?", metavar="scenario")
    p.add_argument("--scenario")
    _add_fixed_point_opts(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fixed_point)

    for name, fn, text in (("simulate", cmd_simulate, "simulate policies"),
                           ("sweep", cmd_simulate, "simulate policies over an h list")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", required=True)
        _add_fixed_point_opts(p)
        _add_sim_opts(p)
        p.add_argument("--out")
        p.set_defaults(func=fn)

    p = sub.add_parser("reproduce", help="canned experiments on the bundled scenarios")
    p.add_argument("figure", choices=["fig1a", "fig1b", "fig2", "fig2b"])
    _add_fixed_point_opts(p)
    _add_sim_opts(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "fixed-point":
        if args.scenario_pos and args.scenario:
            ap.error("give the scenario once")
        args.scenario = args.scenario or args.scenario_pos
        if not args.scenario:
            ap.error("a scenario is required")
        del args.scenario_pos
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tables = args.func(args)
        _emit(tables, args.out)
    except SafetyViolation as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (UsageError, ScenarioError, ValueError, FileNotFoundError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
