"""Command line front end: validate, gen, solve, evaluate, analyze, simulate.

Exit codes: 0 success, 1 no finite-cost policy, 2 usage or validation error,
3 budget exceeded.  All report output is deterministic; timing goes to
stderr so repeated runs stay byte-identical.
"""

from __future__ import annotations

import argparse
import sys

from . import domains
from .errors import DetPomdpError, ModelFormatError
from .graph import DEFAULT_BUDGET
from .model import MINEXP, MINMAX, DetPomdp, load_model, save_model, validate
from .perm import (
    PermutationFailure,
    action_as_permutation,
    build_cycle_instance,
    build_large_order_instance,
    cycle_decomposition,
    diameter_conditions,
    perm_order,
)
from .solve import (
    BUDGET_EXCEEDED,
    NO_FINITE_POLICY,
    SOLVED,
    evaluate_policy,
    format_value,
    load_policy,
    mc_policy_value,
    save_policy,
    simulate,
    solve_explicit,
    solve_heuristic,
    solve_unobservable,
)

EXIT_OK = 0
EXIT_NO_POLICY = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


def _read_model(path: str) -> DetPomdp:
    try:
        with open(path) as fh:
            return load_model(fh.read())
    except OSError as exc:
        raise ModelFormatError(f"{path}: {exc.strerror or exc}")


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_validate(args) -> int:
    try:
        with open(args.model) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {args.model}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        load_model(text)
    except ModelFormatError as exc:
        for problem in exc.problems:
            print(problem)
        return EXIT_USAGE
    print("valid")
    return EXIT_OK


def _gen_model(args) -> DetPomdp:
    if args.domain == "mastermind":
        return domains.gen_mastermind(args.word_length, args.alphabet)
    if args.domain == "coins":
        return domains.gen_coins(args.coins)
    if args.domain == "diagnosis":
        matrix = [[int(c) for c in row] for row in args.matrix.split(";") if row]
        return domains.gen_diagnosis(matrix)
    if args.domain == "gridnav":
        return domains.gen_gridnav(args.grid.split(";"))
    if args.domain == "sat":
        clauses = [
            [int(lit) for lit in clause.split(",") if lit]
            for clause in args.clauses.split(";")
            if clause
        ]
        return domains.gen_sat(clauses)
    if args.domain == "cycles":
        lengths = [int(x) for x in args.lengths.split(",") if x]
        return build_cycle_instance(lengths)
    if args.domain == "large-order":
        return build_large_order_instance(args.states)
    raise DetPomdpError(f"unknown domain {args.domain!r}")


def cmd_gen(args) -> int:
    model = _gen_model(args)
    assert not validate(model)
    _write(args.out, save_model(model))
    return EXIT_OK


def cmd_solve(args) -> int:
    model = _read_model(args.model)
    if args.algorithm == "explicit":
        result = solve_explicit(model, args.criterion, args.budget)
    elif args.algorithm == "aostar":
        result = solve_heuristic(model, args.criterion, args.heuristic, args.budget)
    else:
        result = solve_unobservable(model, args.criterion, args.budget)
    print(f"status {result.status}")
    print(f"value {format_value(result.value, args.criterion)}")
    if result.plan is not None:
        print("plan " + " ".join(model.actions[a].name for a in result.plan))
    print(f"beliefs {result.stats.beliefs}")
    print(f"expanded {result.stats.expanded}")
    print(f"time {result.stats.seconds:.3f}s", file=sys.stderr)
    if result.status == SOLVED and args.out:
        _write(args.out, save_policy(model, result.policy, args.criterion, result.value))
    if result.status == NO_FINITE_POLICY:
        print("no finite-cost policy")
        return EXIT_NO_POLICY
    if result.status == BUDGET_EXCEEDED:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _read_model(args.model)
    with open(args.policy) as fh:
        policy, criterion, stored = load_policy(model, fh.read())
    if args.mc:
        mean, stderr = mc_policy_value(model, policy, criterion, args.mc, args.seed)
        print(f"mc-mean {format(mean, '.9g')}")
        print(f"mc-stderr {format(stderr, '.9g')}")
        return EXIT_OK
    value = evaluate_policy(model, policy, criterion)
    print(f"criterion {criterion}")
    print(f"value {format_value(value, criterion)}")
    if stored:
        print(f"stored {stored}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    model = _read_model(args.model)
    report = diameter_conditions(model)
    sys.stdout.write(report.to_text())
    for a, spec in enumerate(model.actions):
        p = action_as_permutation(model, a)
        if isinstance(p, PermutationFailure):
            witnesses = ",".join(map(str, p.witnesses[:4]))
            print(f"action {spec.name}: not a permutation ({p.kind}: states {witnesses})")
        else:
            cycles = "".join(
                "(" + ",".join(map(str, c)) + ")" for c in cycle_decomposition(p)
            )
            print(f"action {spec.name}: permutation {cycles} order {perm_order(p)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _read_model(args.model)
    with open(args.policy) as fh:
        policy, criterion, _ = load_policy(model, fh.read())
    if args.state is None and not args.all:
        print("error: need --state or --all", file=sys.stderr)
        return EXIT_USAGE
    states = list(model.initial.support()) if args.all else [args.state]
    costs = []
    for s in states:
        trace = simulate(model, policy, s, criterion, args.max_steps)
        costs.append(trace.total_cost)
        print(f"start {s}: {len(trace.steps)} steps, cost {trace.total_cost}, "
              f"reached {'yes' if trace.reached else 'no'}")
        if args.verbose:
            for step in trace.steps:
                name = model.actions[step.action].name
                print(
                    f"  belief {list(step.belief.support())} -> {name}"
                    f" cost {step.cost} obs {step.obs}"
                )
    if args.all:
        value = evaluate_policy(model, policy, criterion)
        worst = max(costs)
        mean = sum(float(c) for c in costs) / len(costs)
        print(f"max-cost {worst}")
        print(f"mean-cost {format(mean, '.9g')}")
        print(f"policy-value {format_value(value, criterion)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detpomdp",
        description="Solve and analyze deterministic POMDPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file against the invariants")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="generate a benchmark model")
    gensub = p.add_subparsers(dest="domain", required=True)
    g = gensub.add_parser("mastermind")
    g.add_argument("--word-length", type=int, required=True)
    g.add_argument("--alphabet", type=int, required=True)
    g = gensub.add_parser("coins")
    g.add_argument("--coins", type=int, required=True)
    g = gensub.add_parser("diagnosis")
    g.add_argument("--matrix", required=True, help="rows of 0/1 separated by ';'")
    g = gensub.add_parser("gridnav")
    g.add_argument("--grid", required=True, help="rows of .#?SG separated by ';'")
    g = gensub.add_parser("sat")
    g.add_argument("--clauses", required=True,
                   help="clauses 'lit,lit;lit,...' with signed 1-based literals")
    g = gensub.add_parser("cycles")
    g.add_argument("--lengths", required=True, help="cycle lengths, comma separated")
    g = gensub.add_parser("large-order")
    g.add_argument("--states", type=int, required=True)
    for g in gensub.choices.values():
        g.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="compute an optimal policy")
    p.add_argument("model")
    p.add_argument("--criterion", choices=(MINMAX, MINEXP), default=MINMAX)
    p.add_argument(
        "--algorithm", choices=("explicit", "aostar", "unobservable"), default="explicit"
    )
    p.add_argument("--heuristic", choices=("zero", "fullobs"), default="zero")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the policy file here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="evaluate a policy file")
    p.add_argument("model")
    p.add_argument("policy")
    p.add_argument("--mc", type=int, default=0, help="Monte-Carlo runs instead of exact")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="diameter conditions and permutation summary")
    p.add_argument("model")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="execute a policy from a concrete state")
    p.add_argument("model")
    p.add_argument("policy")
    p.add_argument("--state", type=int)
    p.add_argument("--all", action="store_true")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ModelFormatError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except DetPomdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
