"""Command-line entry point: ``winmp synth|eval|gen|bench|check``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from .benchgen import (
    Knapsack,
    Sat,
    SubsetSum,
    example1_strategies,
    gen_example1,
    gen_gadget,
    gen_ring3,
    optimal_ring_strategy,
    ring_eval,
)
from .checks import SUITES, run_suite
from .evals import parse_eval
from .io import format_mdp, format_strategy, read_mdp, read_strategy
from .mdp import Augmented, MdpError, MemoryAllocation
from .synthesis import AdamState, SynthConfig, adam_step, evaluate_strategy, init_params_loguniform, objective, synthesize

BENCH_HEADER = ["ell", "d", "K", "method", "mean_step_seconds", "timed_out"]


class UsageError(Exception):
    """Bad flag values detected after argparse accepted the command line."""


def _positive(name):
    def conv(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{name} must be at least 1, got {value}")
        return value

    return conv


def _int_range(text: str) -> range:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text.strip())
    if not m or int(m.group(1)) > int(m.group(2)):
        raise argparse.ArgumentTypeError(f"expected a range 'a..b', got {text!r}")
    return range(int(m.group(1)), int(m.group(2)) + 1)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _echo(command: str, config: dict) -> None:
    print(f"# {command} config: {json.dumps(config, sort_keys=True, default=str)}", file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _header(eval_spec: str, window: int) -> str:
    return f"# eval: {eval_spec}\n# window: {window}\n"


# synth / eval ----------------------------------------------------------------


def cmd_synth(args) -> int:
    mdp = read_mdp(args.mdp)
    ev = parse_eval(args.eval)
    ev.check_arity(mdp.n_payoffs)
    workers = int(os.environ.get("WINMP_THREADS", "1") or 1)
    cfg = SynthConfig(
        steps=args.steps,
        restarts=args.restarts,
        seed=args.seed,
        memory=args.memory,
        lr=args.lr,
        init_a=args.init_a,
        init_b=args.init_b,
        target=args.target,
        workers=max(1, workers),
    )
    _echo("synth", {"mdp": args.mdp, "eval": ev.spec(), "window": args.window, **cfg.echo()})
    result = synthesize(mdp, ev, args.window, cfg)
    for event in result.events:
        print(f"# {event}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(format_strategy(result.strategy), encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(result.trace_csv(), encoding="utf-8")
    print(f"wval {result.wval:.12g}")
    print(f"restart {result.restart} bscc {result.bscc}")
    return 0


def cmd_eval(args) -> int:
    mdp = read_mdp(args.mdp)
    ev = parse_eval(args.eval)
    ev.check_arity(mdp.n_payoffs)
    strategy = read_strategy(args.strategy, mdp)
    method = "dfs" if args.dfs else "dp"
    _echo("eval", {"mdp": args.mdp, "strategy": args.strategy, "eval": ev.spec(), "window": args.window, "method": method})
    report = evaluate_strategy(mdp, strategy, ev, args.window, method)
    print(f"wval {report['wval']:.12g}")
    print(f"gval {report['gval']:.12g}")
    for i, (value, states) in enumerate(zip(report["bscc_values"], report["bscc_states"])):
        mark = "*" if i == report["best_bscc"] else " "
        print(f"{mark}bscc {i} wval {value:.12g} states {' '.join(states)}")
    return 0


# gen -------------------------------------------------------------------------


def _read_dimacs(path: str) -> Sat:
    clauses, n_vars, current = [], None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line[0] in "c%":
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise UsageError(f"bad DIMACS header {line!r}")
            n_vars = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                if current:
                    clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if current:
        clauses.append(tuple(current))
    if n_vars is None:
        raise UsageError("DIMACS file lacks a 'p cnf' header")
    return Sat(tuple(clauses), n_vars)


def _parse_items(text: str) -> tuple[tuple[int, int], ...]:
    items = []
    for part in text.split(","):
        value, sep, weight = part.partition(":")
        if not sep:
            raise UsageError(f"knapsack item {part!r} must be value:weight")
        items.append((int(value), int(weight)))
    return tuple(items)


def cmd_gen(args) -> int:
    what = args.family
    if what == "ring3":
        ev = ring_eval(args.ell, args.window) if args.window else None
        head = _header(ev.spec(), args.window) if ev else ""
        _emit(head + format_mdp(gen_ring3(args.ell)), args.out)
    elif what == "ring-strategy":
        _emit(format_strategy(optimal_ring_strategy(args.ell, args.window)), args.out)
    elif what == "example1":
        mdp, spec, d = gen_example1()
        _emit(_header(spec, d) + format_mdp(mdp), args.out)
        if args.strategies:
            folder = Path(args.strategies)
            folder.mkdir(parents=True, exist_ok=True)
            for name, (strategy, expected) in example1_strategies().items():
                text = f"# expected wval: {expected}\n" + format_strategy(strategy)
                (folder / f"{name}.strategy").write_text(text, encoding="utf-8")
    else:
        if what == "subsetsum":
            instance = SubsetSum(tuple(args.nums), args.target)
        elif what == "knapsack":
            instance = Knapsack(_parse_items(args.items), args.value, args.weight)
        else:
            instance = _read_dimacs(args.cnf)
        mdp, ev, d = gen_gadget(instance)
        _emit(_header(ev.spec(), d) + format_mdp(mdp), args.out)
    return 0


# bench -----------------------------------------------------------------------


def _time_steps(ell: int, K: int, method: str, steps: int, timeout: float, seed: int):
    """Mean wall time of forward + backward + Adam on the ring with ell = d."""
    mdp = gen_ring3(ell)
    aug = Augmented(mdp, MemoryAllocation.full(mdp, K))
    ev = ring_eval(ell, ell).bind(mdp.payoffs)
    theta = init_params_loguniform(aug.n_edges, seed, 1e-3, 10.0)
    state = AdamState.zeros(aug.n_edges)
    start = time.perf_counter()
    deadline = start + timeout
    try:
        for _ in range(steps):
            _, _, grad = objective(aug, ev, ell, theta, method, deadline)
            theta, state = adam_step(theta, grad, state)
            if time.perf_counter() > deadline:
                raise TimeoutError
    except TimeoutError:
        return None
    return (time.perf_counter() - start) / steps


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",")]
    if any(m not in ("dp", "dfs") for m in methods):
        raise UsageError("--methods takes a comma-separated subset of dp,dfs")
    ells = [e for e in args.ell_range if e >= 2 and e % 2 == 0]
    if not ells:
        raise UsageError("--ell-range contains no even value >= 2")
    _echo("bench", {"ells": ells, "memory": list(args.memory), "methods": methods, "timeout": args.timeout,
                    "steps": args.steps, "seed": args.seed})
    rows = []
    for method in methods:
        for K in args.memory:
            exhausted = False
            for ell in ells:
                if exhausted:
                    rows.append([ell, ell, K, method, "", "true"])
                    continue
                mean = _time_steps(ell, K, method, args.steps, args.timeout, args.seed)
                if mean is None:
                    exhausted = True
                    rows.append([ell, ell, K, method, "", "true"])
                else:
                    rows.append([ell, ell, K, method, f"{mean:.6f}", "false"])
                print(",".join(map(str, rows[-1])), file=sys.stderr)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


# check -----------------------------------------------------------------------


def cmd_check(args) -> int:
    _echo("check", {"suite": args.suite})
    ok, lines = run_suite(args.suite)
    for line in lines:
        print(line)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="winmp", description="Window mean-payoff strategy synthesis for MDPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a finite-memory randomized strategy")
    p.add_argument("--mdp", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--window", required=True, type=_positive("--window"))
    p.add_argument("--memory", type=_positive("--memory"), default=1)
    p.add_argument("--steps", type=_positive("--steps"), default=1000)
    p.add_argument("--restarts", type=_positive("--restarts"), default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=SynthConfig.lr)
    p.add_argument("--init-a", type=float, default=SynthConfig.init_a)
    p.add_argument("--init-b", type=float, default=SynthConfig.init_b)
    p.add_argument("--target", type=float, default=None, help="stop a restart once its value is at most this")
    p.add_argument("--out", help="write the best strategy here")
    p.add_argument("--trace", help="write the step,restart,wval trace CSV here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate a stored strategy")
    p.add_argument("--mdp", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--window", required=True, type=_positive("--window"))
    p.add_argument("--dfs", action="store_true", help="use path enumeration instead of dynamic programming")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate benchmark instances")
    gen = p.add_subparsers(dest="family", required=True)
    g = gen.add_parser("ring3")
    g.add_argument("--ell", required=True, type=_positive("--ell"))
    g.add_argument("--window", type=_positive("--window"), help="record the matching threshold eval in a comment")
    g.add_argument("--out")
    g = gen.add_parser("ring-strategy")
    g.add_argument("--ell", required=True, type=_positive("--ell"))
    g.add_argument("--window", required=True, type=_positive("--window"))
    g.add_argument("--out")
    g = gen.add_parser("example1")
    g.add_argument("--out")
    g.add_argument("--strategies", help="directory for the five reference strategies")
    g = gen.add_parser("subsetsum")
    g.add_argument("--nums", required=True, type=_int_list)
    g.add_argument("--target", required=True, type=int)
    g.add_argument("--out")
    g = gen.add_parser("knapsack")
    g.add_argument("--items", required=True, help="value:weight pairs, comma separated")
    g.add_argument("--value", required=True, type=int)
    g.add_argument("--weight", required=True, type=int)
    g.add_argument("--out")
    g = gen.add_parser("sat")
    g.add_argument("--cnf", required=True, help="DIMACS CNF file")
    g.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="timing benchmarks")
    bench = p.add_subparsers(dest="bench", required=True)
    b = bench.add_parser("dp-vs-dfs", help="mean training-step time on the ring with ell = d")
    b.add_argument("--ell-range", type=_int_range, default=_int_range("4..30"))
    b.add_argument("--memory", type=_int_range, default=_int_range("1..5"))
    b.add_argument("--timeout", type=float, default=20.0)
    b.add_argument("--steps", type=_positive("--steps"), default=3)
    b.add_argument("--methods", default="dp,dfs")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="run a self-check suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"winmp: failed: {exc}", file=sys.stderr)
        return 1
    except (UsageError, MdpError, ValueError, TypeError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"winmp: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"winmp: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
