"""Command-line front end.

Subcommands:
    wp / wlp    preweighting tables over a state or grid
    check       invariant checks (super / sub / fixed) against a loop
    compare     transformer vs. brute-force path oracle, or wp ratios
    paths       raw computation-path traces

Exit codes: 0 ok, 2 usage or parse error, 3 some result was not certified
exact, 4 a comparison or check failed.  WGCL_FUEL overrides the default
fuel.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import example_path
from .algebra import AlgebraError, INF
from .operational import (
    BudgetError, DivergenceError, enumerate_paths, initial, olp_oracle,
    op_oracle,
)
from .parser import ParseError, parse_grid, parse_program, parse_state, parse_weighting
from .syntax import EvalError, ExprWeighting, Seq, While, print_program
from .transformer import (
    CertificationError, Engine, NotALoopError, check_fixed_point,
    check_subinvariant, check_superinvariant, wlp_eval,
)

OK, USAGE, INEXACT, MISMATCH = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = USAGE):
        super().__init__(message)
        self.code = code


def _default_fuel() -> int:
    try:
        return int(os.environ.get("WGCL_FUEL", "64"))
    except ValueError:
        return 64


def _load_program(path: str, instance: str | None):
    p = Path(path)
    if not p.is_file():
        try:
            p = example_path(path)
        except FileNotFoundError:
            raise CliError(f"no such program file or bundled example: {path}")
    return parse_program(p.read_text(encoding="utf-8"), instance)


def _states(args) -> tuple[tuple[str, ...], list[State]]:
    if getattr(args, "grid", None):
        return parse_grid(args.grid, args.max_grid)
    literal = getattr(args, "state", None) or ""
    sigma = parse_state(literal)
    names = tuple(sorted({p.split("=")[0].strip() for p in literal.split(",") if p.strip()}))
    return names, [sigma]


def _emit(args, columns: list[str]):
    if args.format == "tsv":
        print("\t".join(columns))
    else:
        print(" | ".join(columns))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_transform(args, liberal: bool) -> int:
    parsed = _load_program(args.program, args.instance)
    alg = parsed.algebra
    post = ExprWeighting(alg, parse_weighting(args.post, alg))
    names, states = _states(args)
    any_inexact = False
    if liberal:
        engine = None
    else:
        engine = Engine(alg, "wp", args.fuel, args.budget)
    for sigma in states:
        if liberal:
            res = wlp_eval(parsed.program, post, sigma, alg, args.fuel, args.budget,
                           mode=args.mode, method=args.method)
        else:
            res = engine.run(parsed.program, post, sigma)
        any_inexact |= not res.exact
        _emit(args, [sigma.format(names), alg.format_value(res.value),
                     "exact" if res.exact else "inexact"])
    return INEXACT if any_inexact else OK


def _flatten_seq(prog):
    while isinstance(prog, Seq):
        yield from _flatten_seq(prog.first)
        prog = prog.second
    yield prog


def _select_loop(program, path: str | None) -> While:
    if path:
        node = program
        for step in path.split("."):
            if step == "body":
                node = node.body
            elif step == "then":
                node = node.then
            elif step in ("else", "orelse"):
                node = node.orelse
            elif step == "left":
                node = node.left
            elif step == "right":
                node = node.right
            elif step.isdigit():
                stmts = list(_flatten_seq(node))
                idx = int(step)
                if idx >= len(stmts):
                    raise CliError(f"loop path index {idx} out of range")
                node = stmts[idx]
            else:
                raise CliError(f"bad loop path step {step!r}")
        if not isinstance(node, While):
            raise CliError("loop path does not select a loop")
        return node
    if isinstance(program, While):
        return program
    loops = [s for s in _flatten_seq(program) if isinstance(s, While)]
    if len(loops) == 1:
        return loops[0]
    raise CliError("not a loop; use --loop-path to select one")


def cmd_check(args) -> int:
    parsed = _load_program(args.program, args.instance)
    alg = parsed.algebra
    loop = _select_loop(parsed.program, args.loop_path)
    post = ExprWeighting(alg, parse_weighting(args.post, alg))
    inv = ExprWeighting(alg, parse_weighting(args.invariant, alg))
    names, states = _states(args)
    failed = False
    if args.mode == "super":
        report = check_superinvariant(loop, post, inv, states, alg, args.fuel, args.budget)
        for v in report.verdicts:
            _emit(args, [v.state.format(names), "holds" if v.holds else "FAILS"])
        if report.all_hold:
            print("conclusion: wp of the loop <= invariant on all checked states")
        failed = not report.all_hold
    elif args.mode == "sub":
        report = check_subinvariant(loop, post, inv, states, alg, args.fuel, args.budget)
        for v in report.verdicts:
            _emit(args, [v.state.format(names), "holds" if v.holds else "FAILS"])
        if report.all_hold:
            print("conclusion: invariant <= wlp of the loop on all checked states")
        failed = not report.all_hold
    else:
        report = check_fixed_point(loop, post, inv, states, alg, args.fuel, args.budget)
        for v in report.verdicts:
            _emit(args, [v.state.format(names),
                         "fixed" if v.fixed else "NOT-FIXED",
                         "uct" if v.certainly_terminates else "divergence-possible"])
        if report.all_fixed:
            print("conclusion: invariant is a fixed point of the characteristic function on the grid")
        if report.all_exact:
            print("conclusion: wp = wlp = invariant at every checked state")
        failed = not report.all_fixed
    return MISMATCH if failed else OK


def cmd_compare(args) -> int:
    parsed = _load_program(args.program, args.instance)
    alg = parsed.algebra
    names, states = _states(args)
    if args.ratio:
        other = _load_program(args.ratio, args.instance)
        if other.algebra != alg:
            raise CliError("ratio programs must share one algebra instance")
        post = ExprWeighting(alg, parse_weighting(args.post, alg))
        num_engine = Engine(alg, "wp", args.fuel, args.budget)
        den_engine = Engine(alg, "wp", args.fuel, args.budget)
        worst: Fraction | None = None
        code = OK
        for sigma in states:
            num = num_engine.run(parsed.program, post, sigma)
            den = den_engine.run(other.program, post, sigma)
            if not (num.exact and den.exact):
                code = INEXACT
            nv, dv = num.value.value, den.value.value
            if nv is INF or dv is INF or dv == 0:
                _emit(args, [sigma.format(names), str(nv), str(dv), "undefined"])
                continue
            ratio = Fraction(nv, dv)
            worst = ratio if worst is None or ratio > worst else worst
            _emit(args, [sigma.format(names), str(nv), str(dv), str(ratio)])
        print(f"max ratio on grid: {worst if worst is not None else 'undefined'}")
        return code
    post = ExprWeighting(alg, parse_weighting(args.post, alg))
    engine = Engine(alg, "wlp" if args.liberal else "wp", args.fuel, args.budget)
    mismatch = False
    any_inexact = False
    for sigma in states:
        if args.liberal:
            res = wlp_eval(parsed.program, post, sigma, alg, args.fuel, args.budget)
            oracle = olp_oracle(parsed.program, sigma, alg, args.fuel, args.budget)
        else:
            res = engine.run(parsed.program, post, sigma)
            oracle = op_oracle(parsed.program, sigma, post, alg, args.fuel, args.budget)
        equal = res.value == oracle.value
        if res.exact and oracle.exact and not equal:
            mismatch = True
        any_inexact |= not (res.exact and oracle.exact)
        _emit(args, [
            sigma.format(names),
            alg.format_value(res.value), "exact" if res.exact else "inexact",
            alg.format_value(oracle.value), "exact" if oracle.exact else "inexact",
            "agree" if equal else "DIFFER",
        ])
    if mismatch:
        return MISMATCH
    return INEXACT if any_inexact else OK


def cmd_paths(args) -> int:
    parsed = _load_program(args.program, args.instance)
    alg = parsed.algebra
    names, states = _states(args)
    for sigma in states:
        report = enumerate_paths(initial(parsed.program, sigma), args.depth, alg, args.budget)
        for path in report.paths:
            _emit(args, [
                "".join(path.history) or "-",
                alg.format_weight(path.weight.value),
                path.last_state.format() or "-",
                "terminal" if path.terminal else "open",
            ])
    return OK


def cmd_print(args) -> int:
    parsed = _load_program(args.program, args.instance)
    print(f"@instance {parsed.algebra.name}")
    print(print_program(parsed.program, parsed.algebra))
    return OK


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

def _add_common(sub, post=True):
    sub.add_argument("program", help="program file, or the name of a bundled example")
    sub.add_argument("--instance", help="override the @instance pragma")
    if post:
        sub.add_argument("--post", default="one", help="postweighting expression")
    sub.add_argument("--state", help="state literal, e.g. x=2,y=3")
    sub.add_argument("--grid", help="state grid, e.g. x=0..8,y=0..8")
    sub.add_argument("--fuel", type=int, default=_default_fuel())
    sub.add_argument("--budget", type=int, default=10 ** 6, help="node budget")
    sub.add_argument("--max-grid", type=int, default=10 ** 5)
    sub.add_argument("--format", choices=("text", "tsv"), default="text")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgcl",
                                 description="weighted guarded-command programs")
    sp = ap.add_subparsers(dest="command", required=True)

    wp = sp.add_parser("wp", help="weakest preweighting")
    _add_common(wp)

    wlp = sp.add_parser("wlp", help="weakest liberal preweighting")
    _add_common(wlp)
    wlp.add_argument("--mode", choices=("gfp", "gfp_leq_one"), default="gfp")
    wlp.add_argument("--method", choices=("auto", "chain", "lasso"), default="auto")

    check = sp.add_parser("check", help="invariant checks for a loop")
    _add_common(check)
    check.add_argument("--invariant", required=True)
    check.add_argument("--mode", choices=("super", "sub", "fixed"), required=True)
    check.add_argument("--loop-path", help="select a nested loop, e.g. 2 or 2.body.0")

    comp = sp.add_parser("compare", help="transformer vs. path oracle, or --ratio")
    _add_common(comp)
    comp.add_argument("--liberal", action="store_true", help="compare wlp against the liberal oracle")
    comp.add_argument("--ratio", metavar="OTHER",
                      help="second program; report wp(program)/wp(OTHER) per state")

    paths = sp.add_parser("paths", help="enumerate computation paths")
    _add_common(paths, post=False)
    paths.add_argument("--depth", type=int, default=16)

    pr = sp.add_parser("print", help="parse and pretty-print a program")
    _add_common(pr, post=False)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else 0
    try:
        if args.command == "wp":
            return cmd_transform(args, liberal=False)
        if args.command == "wlp":
            return cmd_transform(args, liberal=True)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "paths":
            return cmd_paths(args)
        if args.command == "print":
            return cmd_print(args)
        raise CliError(f"unknown command {args.command!r}")
    except CliError as exc:
        print(f"wgcl: {exc}", file=sys.stderr)
        return exc.code
    except (ParseError, AlgebraError, EvalError, NotALoopError,
            CertificationError, DivergenceError, BudgetError) as exc:
        print(f"wgcl: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
