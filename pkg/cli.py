# cli.py
"""Command-line front end: run, verify, exante, experiment, example1.

Exit codes: 0 when everything ran and every check passed, 1 when a check failed,
2 for usage errors and unusable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from analysis import THEOREMS, brute_force_opt, exante_bound_check, verify_run
from core import RoundRobinError, allocation_of, load_instance
from engine import (
    GreedyPolicy,
    ProtocolConfig,
    default_policies,
    example1_instance,
    example1_strategic_policy,
    policy_from_dict,
    run_round_robin,
    write_trace,
)
from experiments import load_experiment_spec, run_experiment, write_csv
from utils import agent_summary_frame, allocation_frame, configure_logging, exante_frame, verification_frame

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _policies(arg: Optional[str], instance):
    if not arg:
        return default_policies(instance)
    path = Path(arg)
    if path.suffix == ".json" and path.exists():
        specs = json.loads(path.read_text(encoding="utf-8"))
    else:
        specs = [kind.strip() for kind in arg.split(",")]
    if len(specs) == 1 and instance.n > 1:
        specs = specs * instance.n
    return [policy_from_dict(spec) for spec in specs]


def _theorems(arg: str) -> list[str]:
    names = [t.strip().upper() for t in arg.split(",") if t.strip()]
    unknown = [t for t in names if t not in THEOREMS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown theorems {unknown}; choose from {', '.join(THEOREMS)}")
    return names


def _print_frame(frame: pd.DataFrame) -> None:
    print(frame.to_string(index=False))


# === SUBCOMMANDS ===

def cmd_run(args) -> int:
    instance = load_instance(args.instance)
    policies = _policies(args.policies, instance)
    config = ProtocolConfig(seed=args.seed, negative_marginal_rule=args.rule)
    trace = run_round_robin(instance, policies, config)
    allocation = allocation_of(trace)
    print(f"permutation: {list(trace.permutation)}")
    _print_frame(allocation_frame(allocation, instance))
    if args.trace:
        write_trace(trace, args.trace)
    return EXIT_OK


def cmd_verify(args) -> int:
    instance = load_instance(args.instance)
    policies = _policies(args.policies, instance)
    if args.fleet:
        configs = [ProtocolConfig(seed=args.seed + r) for r in range(args.fleet)]
    else:
        configs = [ProtocolConfig(seed=args.seed) if args.seed is not None else ProtocolConfig()]

    frames, passed = [], True
    for run, config in enumerate(configs):
        report = verify_run(run_round_robin(instance, policies, config), args.theorems)
        frame = verification_frame(report)
        frame.insert(0, 'run', run)
        frame.insert(1, 'permutation', " ".join(str(a) for a in report.trace.permutation))
        frames.append(frame)
        passed &= report.passed
        if report.saturation is not None and not report.saturation.passed:
            print(f"run {run}: saturation violated by (agent, item) {report.saturation.violations}")
        if not args.fleet:
            _print_frame(agent_summary_frame(report))

    if "T7" in args.theorems:
        exante = exante_bound_check(instance, policies, mode="exact" if instance.n <= 6 else "montecarlo",
                                    seed=args.seed or 0)
        print("T7 (ex-ante):")
        _print_frame(exante_frame(exante))
        passed &= exante.passed

    combined = pd.concat(frames, ignore_index=True)
    _print_frame(combined)
    if args.report:
        Path(args.report).write_text(combined.to_json(orient="records", indent=2) + "\n", encoding="utf-8")
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAILED


def cmd_exante(args) -> int:
    instance = load_instance(args.instance)
    policies = _policies(args.policies, instance)
    if args.samples:
        report = exante_bound_check(instance, policies, mode="montecarlo", samples=args.samples, seed=args.seed)
    else:
        report = exante_bound_check(instance, policies, mode="exact")
    _print_frame(exante_frame(report))
    print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_experiment(args) -> int:
    spec = load_experiment_spec(args.spec)
    rows = run_experiment(spec, workers=args.workers)
    write_csv(rows, args.csv)
    print(f"wrote {len(rows)} rows to {args.csv}")
    return EXIT_OK


def cmd_example1(args) -> int:
    instance = example1_instance(args.n)
    policies = [GreedyPolicy() for _ in range(args.n)]
    if args.strategic:
        policies[0] = example1_strategic_policy(args.n)
    allocation = allocation_of(run_round_robin(instance, policies))
    f1 = instance.agents[0].objective
    label = "strategic" if args.strategic else "greedy"
    print(f"{label} value {f1.value(allocation.bundles[0].chosen):g}")
    if args.n <= 4:
        opt = brute_force_opt(f1, instance.agents[0].constraint, range(instance.m))[0]
    else:
        # agent 1 is additive with no binding constraint
        opt = float(f1.singletons.sum())
    print(f"OPT {opt:g}")
    return EXIT_OK


# === PARSER ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roundrobin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every pick")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Round-Robin protocol on an instance file")
    run.add_argument("instance")
    run.add_argument("--policies", help="comma-separated policy kinds or a JSON list of policy specs")
    run.add_argument("--seed", type=int, help="randomize the agent order with this seed")
    run.add_argument("--rule", choices=["as_written", "skip_nonpositive"], default="as_written")
    run.add_argument("--trace", help="write the pick trace to this file")
    run.set_defaults(handler=cmd_run)

    verify = sub.add_parser("verify", help="check theorem bounds on an instance file")
    verify.add_argument("instance")
    verify.add_argument("--theorems", type=_theorems, default=list(THEOREMS[:6]))
    verify.add_argument("--policies")
    verify.add_argument("--fleet", type=int, default=0, help="verify this many randomized orders")
    verify.add_argument("--seed", type=int)
    verify.add_argument("--report", help="write the check table as JSON")
    verify.set_defaults(handler=cmd_verify)

    exante = sub.add_parser("exante", help="ex-ante bound over random agent orders")
    exante.add_argument("instance")
    mode = exante.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="enumerate all n! orders (default)")
    mode.add_argument("--samples", type=int, help="Monte-Carlo over this many orders")
    exante.add_argument("--seed", type=int, default=0)
    exante.add_argument("--policies")
    exante.set_defaults(handler=cmd_exante)

    experiment = sub.add_parser("experiment", help="competing influence maximizers on random graphs")
    experiment.add_argument("spec")
    experiment.add_argument("--csv", required=True)
    experiment.add_argument("--workers", type=int, default=1)
    experiment.set_defaults(handler=cmd_experiment)

    example1 = sub.add_parser("example1", help="the instance where greedy agent 1 ends with 2 of 2n")
    example1.add_argument("--n", type=int, required=True)
    example1.add_argument("--strategic", action="store_true")
    example1.set_defaults(handler=cmd_example1)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    configure_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)
    if args.command == "verify" and args.fleet and args.seed is None:
        args.seed = 0
    try:
        return args.handler(args)
    except (RoundRobinError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(cli_main())
