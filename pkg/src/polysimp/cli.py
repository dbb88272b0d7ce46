"""Command-line front end: ``polysimp simplify | check | lattice | cone``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import geometry as geo
from . import schedule as sch
from .dsl import ParseError, emit, fmt_constraint, parse
from .ir import Reduce, ValidationError, effective_domain, walk
from .oracle import FUNCS, EvaluationError, equivalent
from .simplify import RhoRejected, complexity_report, simplify_system

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


def _load(path: str, require_inverse: bool = False):
    return parse(Path(path).read_text(encoding="utf-8"), require_inverse=require_inverse)


def _diag(msg: str) -> None:
    print(f"polysimp: {msg}", file=sys.stderr)


def _parse_rho(text: str) -> tuple[str, tuple[int, ...]]:
    name, _, vec = text.partition("=")
    vec = vec.strip().strip("()[]")
    if not name or not vec:
        raise argparse.ArgumentTypeError(f"expected VAR=(v1,v2,...), got {text!r}")
    try:
        return name.strip(), tuple(int(x) for x in vec.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad reuse vector in {text!r}") from None


def _parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _parse_func(text: str) -> tuple[str, str]:
    name, _, impl = text.partition("=")
    if impl not in FUNCS:
        raise argparse.ArgumentTypeError(f"unknown function {impl!r}; choose from {sorted(FUNCS)}")
    return name, impl


def cmd_simplify(args) -> int:
    try:
        src = _load(args.input, args.require_inverse)
    except (OSError, ParseError, ValidationError) as exc:
        _diag(str(exc))
        return EXIT_USAGE
    if args.assume_nonzero:
        src = src.replace(assume_nonzero=True)
    start = time.perf_counter()
    try:
        plan = simplify_system(src, force=dict(args.force_rho or []), schedule_check=not args.no_schedule_check)
    except RhoRejected as exc:
        _diag(f"rejected: {exc}")
        return EXIT_USAGE
    except sch.ScheduleError as exc:
        _diag(f"schedule witness failed: {exc}")
        return EXIT_INTERNAL
    report = complexity_report(plan)
    if args.timing:
        report["wall_time_s"] = round(time.perf_counter() - start, 6)
    text = emit(plan.system)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        a, b = _load(args.a), _load(args.b)
    except (OSError, ParseError, ValidationError) as exc:
        _diag(str(exc))
        return EXIT_USAGE
    seed = int(os.environ.get("POLYSIMP_SEED", args.seed))
    try:
        verdict = equivalent(a, b, _parse_range(args.n), args.trials, seed, dict(args.func or []))
    except EvaluationError as exc:
        _diag(f"evaluation failed: {exc}")
        return EXIT_USAGE
    print(verdict.describe())
    return EXIT_OK if verdict.equal else EXIT_MISMATCH


def cmd_lattice(args) -> int:
    try:
        s = _load(args.input)
        var = s.var(args.var)
    except (OSError, ParseError, ValidationError) as exc:
        _diag(str(exc))
        return EXIT_USAGE
    except KeyError:
        _diag(f"unknown variable {args.var}")
        return EXIT_USAGE
    shown = False
    if var.role != "input":
        for b, br in enumerate(s.equation(var.name).branches, 1):
            region = var.domain.intersect(br.guard)
            for e in walk(br.expr):
                if isinstance(e, Reduce):
                    dom = effective_domain(e, region)
                    _print_lattice(f"{var.name} branch {b} reduction over ({', '.join(e.names)})", dom, e.names)
                    shown = True
    if not shown:
        _print_lattice(f"{var.name} domain", var.domain, var.names)
    return EXIT_OK


def _print_lattice(title: str, p, names) -> None:
    print(f"# {title}")
    if p.empty:
        print("empty")
        return
    for k, c in enumerate(p.inequalities):
        print(f"c{k}: {fmt_constraint(c, names, 'N')}")
    for c in p.equalities:
        print(f"eq: {fmt_constraint(c, names, 'N')}")
    print(geo.face_lattice(p).dump())


def cmd_cone(args) -> int:
    try:
        s = _load(args.input)
        s.var(args.var)
    except (OSError, ParseError, ValidationError) as exc:
        _diag(str(exc))
        return EXIT_USAGE
    except KeyError:
        _diag(f"unknown variable {args.var}")
        return EXIT_USAGE
    ctx = sch.build_context(s)
    if args.var not in ctx.layout.names:
        _diag(f"{args.var} is an input and has no schedule")
        return EXIT_USAGE
    cone = sch.project_on_variable(ctx, args.var)
    names = list(s.var(args.var).names) + ["N", "1"]
    print(f"# schedule row coefficients of {args.var}: ({', '.join(names)})")
    for c in cone.constraints:
        print("constraint: " + " ".join(str(x) for x in c.coeffs) + (" = 0" if c.eq else " >= 0"))
    for g in cone.generators:
        print("generator: (" + ", ".join(str(x) for x in g) + ")")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polysimp", description="Simplify polyhedral reductions.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simplify", help="rewrite reductions to lower their complexity")
    s.add_argument("input")
    s.add_argument("--out")
    s.add_argument("--report")
    s.add_argument("--no-schedule-check", action="store_true",
                   help="skip the compatibility filter on reuse vectors")
    s.add_argument("--assume-nonzero", action="store_true", help="treat times as invertible")
    s.add_argument("--require-inverse", action="store_true", help="reject reductions without an inverse")
    s.add_argument("--force-rho", type=_parse_rho, action="append", metavar="VAR=(v1,...)",
                   help="test hook (unstable): apply this reuse vector to VAR's reductions")
    s.add_argument("--timing", action="store_true", help="add wall time to the report")
    s.set_defaults(handler=cmd_simplify)

    c = sub.add_parser("check", help="compare two programs on random inputs")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--n", default="1..12")
    c.add_argument("--trials", type=int, default=3)
    c.add_argument("--seed", type=int, default=7)
    c.add_argument("--func", type=_parse_func, action="append", metavar="f=IMPL",
                   help="override a declared function's interpretation")
    c.set_defaults(handler=cmd_check)

    la = sub.add_parser("lattice", help="print the face lattice of a variable's reduction domain")
    la.add_argument("input")
    la.add_argument("--var", required=True)
    la.set_defaults(handler=cmd_lattice)

    co = sub.add_parser("cone", help="print a variable's projected schedule cone")
    co.add_argument("input")
    co.add_argument("--var", required=True)
    co.set_defaults(handler=cmd_cone)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - anything left is an internal failure
        _diag(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
