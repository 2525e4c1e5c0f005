"""Command line entry point: ``hybridcast <command> ...``."""
from __future__ import annotations

import argparse
import sys

from .. import __version__
from ..channelizers import CLI_ALGORITHMS, ALGORITHMS, SolverConfig, solve
from ..formats import FormatError, load_instance, load_solution, save_instance, save_solution
from ..hybrid import HEURISTICS, HeuristicConfig, run_pipeline
from ..model import (BRUTE_FORCE_LIMIT, HybridSolution, InstanceError, SearchSpaceTooLarge,
                     StructureError, brute_force_optimum, hybrid_cost, is_feasible)
from ..workloads import MarketSpec, RandomSpec, TraceSpec, generate
from .bench import read_csv, run_benchmark
from .charts import CHART_KINDS, render_chart
from .config import ConfigError, load_config

EXIT_ERROR = 1
EXIT_TOO_LARGE = 3

_MODELS = {"random": (RandomSpec, "n", "m"), "market": (MarketSpec, "n_symbols", "m_users"),
           "trace": (TraceSpec, "n_topics", "m_processes")}


class CliError(Exception):
    def __init__(self, msg: str, code: int = EXIT_ERROR):
        super().__init__(msg)
        self.code = code


def _kv(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def _budget(text: str) -> float:
    try:
        b = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= b <= 1.0:
        raise argparse.ArgumentTypeError("budget must lie in [0, 1]")
    return b


def _solver_args(p: argparse.ArgumentParser):
    p.add_argument("--algo", default="kmeans",
                   choices=sorted(set(CLI_ALGORITHMS) | set(ALGORITHMS)))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=5, help="max sweeps/iterations t")
    p.add_argument("--restarts", type=int, default=1)


def _solver(args) -> SolverConfig:
    return SolverConfig(args.algo, args.iterations, args.restarts, args.seed)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridcast",
                                 description="Hybrid multicast/unicast channelization.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--model", required=True, choices=sorted(_MODELS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, help="flows (symbols/topics)")
    p.add_argument("--m", type=int, help="users (processes)")
    p.add_argument("--k", type=int, help="multicast groups")
    p.add_argument("--set", dest="params", type=_kv, action="append", default=[],
                   metavar="KEY=VALUE", help="any other generator field")
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="step one: pure multicast channelization")
    p.add_argument("--in", dest="inp", required=True)
    _solver_args(p)
    p.add_argument("--out", help="write the solution here (CHANSOL1)")

    p = sub.add_parser("hybrid", help="step one plus a unicast heuristic")
    p.add_argument("--in", dest="inp", required=True)
    _solver_args(p)
    p.add_argument("--heuristic", default="greedy_flow", choices=[*HEURISTICS, "none"])
    p.add_argument("--mode", default="noniter",
                   choices=["noniter", "iter", "non_iterative", "iterative"])
    p.add_argument("--direction", default="mfirst",
                   choices=["mfirst", "ufirst", "multicast_first", "unicast_first"])
    p.add_argument("--budget", type=_budget, default=1.0,
                   help="unicast cap as a fraction of demanded bandwidth")
    p.add_argument("--unconditional", action="store_true",
                   help="sorted heuristics move items even when cost rises")
    p.add_argument("--force-budget", action="store_true",
                   help="greedy heuristics keep filling the budget at non-negative delta")
    p.add_argument("--scan-past", action="store_true",
                   help="sorted heuristics skip rejected items instead of stopping")
    p.add_argument("--out")

    p = sub.add_parser("eval", help="recompute the cost of a solution file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--sol", required=True)

    p = sub.add_parser("oracle", help="exact optimum by enumeration (tiny instances)")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--limit", type=int, default=BRUTE_FORCE_LIMIT)
    p.add_argument("--out")

    p = sub.add_parser("bench", help="run a benchmark config and write CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path (overrides csv= in the config)")
    p.add_argument("--chart", help="also render an SVG chart")
    p.add_argument("--kind", choices=CHART_KINDS)
    p.add_argument("--threads", type=int, help="parallel runs (default: CHAN_THREADS or 1)")

    p = sub.add_parser("plot", help="render an SVG chart from a results CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--kind", required=True, choices=CHART_KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--title")
    return ap


def _cmd_gen(args):
    import dataclasses
    from .config import _coerce
    spec_cls, nkey, mkey = _MODELS[args.model]
    kw = {}
    for key, value in args.params:
        try:
            kw[key] = _coerce(spec_cls, key, value)
        except KeyError:
            raise CliError(f"unknown {args.model} parameter {key!r}; known: "
                           f"{[f.name for f in dataclasses.fields(spec_cls) if f.name != 'seed']}")
    for key, v in ((nkey, args.n), (mkey, args.m), ("k", args.k)):
        if v is not None:
            kw[key] = v
    inst = generate(spec_cls(seed=args.seed, **kw))
    save_instance(inst, args.out)
    print(f"wrote {args.out}: n={inst.n} m={inst.m} k={inst.k} |W|={inst.nnz}")


def _report(inst, sol, extra=""):
    feas = is_feasible(inst, sol)
    if not feas:
        raise CliError(f"solution is infeasible; uncovered pairs {feas.uncovered[:10]}")
    print(hybrid_cost(inst, sol).format() + extra)


def _cmd_solve(args):
    inst = load_instance(args.inp)
    sol = HybridSolution.from_channelization(solve(inst, _solver(args)))
    if args.out:
        save_solution(sol, args.out)
    _report(inst, sol)


def _cmd_hybrid(args):
    inst = load_instance(args.inp)
    cfg = HeuristicConfig(args.heuristic, args.mode, args.direction, args.budget, _solver(args),
                          args.unconditional, args.force_budget, args.scan_past)
    res = run_pipeline(inst, cfg)
    if args.out:
        save_solution(res.solution, args.out)
    _report(inst, res.solution, f" moves={res.moves} unicast_frac={res.unicast_fraction:.6f}")


def _cmd_eval(args):
    inst = load_instance(args.inp)
    sol = load_solution(args.sol)
    _report(inst, sol)


def _cmd_oracle(args):
    inst = load_instance(args.inp)
    try:
        sol, cost = brute_force_optimum(inst, limit=args.limit)
    except SearchSpaceTooLarge as e:
        raise CliError(f"refusing: {e}", EXIT_TOO_LARGE) from None
    if args.out:
        save_solution(sol, args.out)
    _report(inst, sol)


def _cmd_bench(args):
    cfg = load_config(args.config)
    out = args.out or cfg.csv
    if not out:
        raise CliError("no output CSV: pass --out or set csv= in the config")
    rows = run_benchmark(cfg, out, args.threads)
    errors = sum(not r.ok for r in rows)
    chart = args.chart or cfg.chart
    if chart:
        render_chart(rows, args.kind or cfg.chart_kind, chart)
    print(f"wrote {out}: {len(rows)} rows, {errors} errors" + (f"; chart {chart}" if chart else ""))


def _cmd_plot(args):
    rows = read_csv(args.inp)
    render_chart(rows, args.kind, args.out, args.title)
    print(f"wrote {args.out}")


_COMMANDS = {"gen": _cmd_gen, "solve": _cmd_solve, "hybrid": _cmd_hybrid, "eval": _cmd_eval,
             "oracle": _cmd_oracle, "bench": _cmd_bench, "plot": _cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except CliError as e:
        print(f"hybridcast {args.command}: {e}", file=sys.stderr)
        return e.code
    except (FormatError, ConfigError, InstanceError, StructureError, OSError, ValueError) as e:
        print(f"hybridcast {args.command}: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
