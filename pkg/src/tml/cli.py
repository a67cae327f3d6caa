"""Command line driver.

Subcommands cover the pipeline end to end: parse a program, run it under
a scheduling policy, derive its behavioural types and cost equations
with an optional concrete bound, check simulated runs against evaluated
bounds over an argument grid, and emit solver input clauses.

Exit codes: 0 success, 1 internal error or a failed soundness check,
2 malformed input or a program that does not parse or type, and
3 when a check cannot conclude (Zeno behaviour, exhausted budgets,
truncated schedule exploration).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from fractions import Fraction
from typing import Optional

from .btypes import render_program_btypes, type_program
from .costgen import render_cost_system, render_equation, translate_program
from .costsolve import (
    BUDGET_EXHAUSTED,
    DEFAULT_BUDGET,
    UNBOUNDED,
    emit_cofloco,
    eval_cost,
)
from .errors import TmlError, MethodTypingErrors
from .interp import (
    DEFAULT_MAX_STEPS,
    DEFAULT_MAX_TICKS,
    TERMINATED,
    FifoPolicy,
    SeededRandomPolicy,
    explore,
    simulate,
)
from .parser import parse_program


class UsageError(Exception):
    """Bad flag combination or malformed flag value."""


def _read_program(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_program(fh.read())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}")


def _assignments(items, ranges: bool = False) -> dict:
    """Parse repeated `name=value` (or `name=a..b` when ranges) flags."""
    out: dict = {}
    for item in items or ():
        for piece in item.split(","):
            if "=" not in piece:
                raise UsageError(f"expected name=value, got {piece!r}")
            name, _, value = piece.partition("=")
            name = name.strip()
            if name in out:
                raise UsageError(f"duplicate value for {name!r}")
            if ranges and ".." in value:
                lo, _, hi = value.partition("..")
                a, b = _int(lo), _int(hi)
                if b < a:
                    raise UsageError(f"empty range {value!r}")
                out[name] = [Fraction(i) for i in range(a, b + 1)]
            elif ranges:
                out[name] = [_fraction(value)]
            else:
                out[name] = _fraction(value)
    return out


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"not an integer: {text!r}")


def _policy(spec: str, default_seed: int):
    name, _, arg = spec.partition(":")
    if name == "fifo" and not arg:
        return FifoPolicy()
    if name == "random":
        return SeededRandomPolicy(_int(arg) if arg else default_seed)
    raise UsageError(f"unknown policy {spec!r}")


def _bound_str(v) -> str:
    return str(v)


def _emit(ns, payload: dict, text: str) -> None:
    if ns.json:
        print(json.dumps(payload))
    elif text:
        print(text)


def _default_symbol(program) -> Optional[str]:
    """Target for analysis: the entry block when it has a body or there is
    nothing else, otherwise the program's only method."""
    if program.main.body is not None or not program.methods:
        return "main"
    if len(program.methods) == 1:
        return program.methods[0].name
    return None


# ---------------------------------------------------------------------------
# subcommands

def _cmd_parse(ns) -> int:
    from .ast import pretty_program

    program = _read_program(ns.file)
    payload = {
        "methods": [
            {
                "name": m.name,
                "params": [p.name for p in m.params],
                "ret": str(m.ret_type.name if hasattr(m.ret_type, "name") else m.ret_type),
            }
            for m in program.methods
        ],
        "main": {
            "locals": [d.name for d in program.main.locals_],
            "capacity": _bound_str(program.main.capacity),
            "empty": program.main.body is None,
        },
    }
    _emit(ns, payload, pretty_program(program))
    return 0


def _cmd_simulate(ns) -> int:
    program = _read_program(ns.file)
    bindings = _assignments(ns.bind)
    name, _, arg = ns.policy.partition(":")
    if name == "exhaustive":
        res = explore(
            program,
            bindings,
            max_forks=_int(arg) if arg else 256,
            max_steps=ns.max_steps,
            max_ticks=ns.max_ticks,
        )
        worst = max(res.results, key=lambda r: r.elapsed)
        outcomes: dict = {}
        for r in res.results:
            outcomes[r.outcome] = outcomes.get(r.outcome, 0) + 1
        payload = {
            "schedules": len(res.results),
            "forks": res.fork_events,
            "truncated": res.truncated,
            "worst_elapsed": _bound_str(worst.elapsed),
            "outcomes": outcomes,
        }
        text = (
            f"schedules {len(res.results)} (forks {res.fork_events}"
            f"{', truncated' if res.truncated else ''})\n"
            f"worst elapsed {worst.elapsed}\n"
            f"outcomes {' '.join(f'{k}={v}' for k, v in sorted(outcomes.items()))}"
        )
        _emit(ns, payload, text)
        return 0

    trace: Optional[list] = [] if ns.trace else None
    res = simulate(
        program,
        bindings,
        _policy(ns.policy, ns.seed),
        max_steps=ns.max_steps,
        max_ticks=ns.max_ticks,
        trace=trace,
    )
    if ns.trace:
        with open(ns.trace, "w", encoding="utf-8") as fh:
            for ev in trace:
                fh.write(
                    json.dumps(
                        {"rule": ev.rule, "object": ev.obj, "elapsed": _bound_str(ev.elapsed)}
                    )
                    + "\n"
                )
    payload = {
        "outcome": res.outcome,
        "elapsed": _bound_str(res.elapsed),
        "ticks": res.ticks,
        "steps": res.steps,
    }
    _emit(
        ns,
        payload,
        f"{res.outcome} at {res.elapsed} (ticks {res.ticks}, steps {res.steps})",
    )
    return 0


def _cmd_analyze(ns) -> int:
    program = _read_program(ns.file)
    pb = type_program(program)
    system = translate_program(pb)

    symbol = ns.symbol or _default_symbol(program)
    if symbol is None:
        raise UsageError("several methods and an empty entry block; use --symbol")
    if symbol not in system.symbols:
        raise UsageError(f"no such method: {symbol!r}")
    info = system.symbols[symbol]

    supplied = _assignments(ns.args)
    if ns.capacity is not None:
        if info.cap_formal is None:
            raise UsageError(f"{symbol!r} has a fixed capacity; --capacity does not apply")
        if info.cap_formal in supplied:
            raise UsageError(f"capacity given twice for {info.cap_formal!r}")
        supplied[info.cap_formal] = _fraction(ns.capacity)
    for name in supplied:
        if name not in info.formals:
            raise UsageError(f"{symbol!r} has no parameter {name!r}")

    bound = None
    missing = [f for f in info.formals if f not in supplied]
    if not missing:
        bound = eval_cost(system, symbol, [supplied[f] for f in info.formals], ns.budget)
    elif supplied:
        raise UsageError(f"missing value for {', '.join(repr(m) for m in missing)}")

    want_btypes = ns.dump_btypes or not ns.dump_equations
    want_equations = ns.dump_equations or not ns.dump_btypes
    only_dump = ns.dump_btypes or ns.dump_equations

    payload: dict = {"symbol": symbol}
    sections = []
    if want_btypes:
        payload["btypes"] = render_program_btypes(pb)
        sections.append(payload["btypes"])
    if want_equations:
        payload["equations"] = [render_equation(eq) for eq in system.equations]
        sections.append(render_cost_system(system))
    if bound is not None and not only_dump:
        payload["bound"] = _bound_str(bound)
        sections.append(f"bound {_bound_str(bound)}")
    _emit(ns, payload, "\n\n".join(sections))
    return 0


def _cmd_check(ns) -> int:
    program = _read_program(ns.file)
    system = translate_program(type_program(program))
    formals = system.symbols["main"].formals
    grid = _assignments(ns.args, ranges=True)
    for name in grid:
        if name not in formals:
            raise UsageError(f"entry block has no parameter {name!r}")
    for f in formals:
        if f not in grid:
            raise UsageError(f"missing grid for {f!r}")

    points = [()]
    for f in formals:
        points = [p + (v,) for p in points for v in grid[f]]

    rows = []
    verdict = "PASS"
    max_gap = None
    for point in points:
        label = ", ".join(f"{f}={v}" for f, v in zip(formals, point)) or "-"
        bound = eval_cost(system, "main", list(point), ns.budget)
        res = explore(
            program,
            dict(zip(formals, point)),
            max_forks=ns.max_forks,
            max_steps=ns.max_steps,
            max_ticks=ns.max_ticks,
        )
        worst = max(r.elapsed for r in res.results)
        inconclusive = (
            res.truncated
            or bound is BUDGET_EXHAUSTED
            or any(r.outcome != TERMINATED for r in res.results)
        )
        if inconclusive:
            status = "INCONCLUSIVE"
            if verdict == "PASS":
                verdict = "INCONCLUSIVE"
        elif bound is UNBOUNDED or worst <= bound:
            status = "PASS"
            if bound is not UNBOUNDED:
                gap = bound - worst
                if max_gap is None or gap > max_gap[1]:
                    max_gap = (label, gap)
        else:
            status = "FAIL"
            verdict = "FAIL"
        rows.append(
            {
                "point": label,
                "bound": _bound_str(bound),
                "worst_elapsed": _bound_str(worst),
                "schedules": len(res.results),
                "status": status,
            }
        )

    lines = [
        f"{r['point']}: elapsed {r['worst_elapsed']} bound {r['bound']} "
        f"({r['schedules']} schedules) {r['status']}"
        for r in rows
    ]
    if max_gap is not None:
        lines.append(f"max gap {max_gap[1]} at {max_gap[0]}")
    lines.append(verdict)
    payload = {
        "points": rows,
        "verdict": verdict,
        "max_gap": None if max_gap is None else {"point": max_gap[0], "gap": _bound_str(max_gap[1])},
    }
    _emit(ns, payload, "\n".join(lines))
    return {"PASS": 0, "FAIL": 1, "INCONCLUSIVE": 3}[verdict]


def _cmd_emit_cofloco(ns) -> int:
    program = _read_program(ns.file)
    system = translate_program(type_program(program))
    bindings = _assignments(ns.capacity)
    roots = tuple(ns.symbol) if ns.symbol else None
    text = emit_cofloco(system, bindings, symbols=roots)
    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        _emit(ns, {"out": ns.out, "clauses": text.count("\n")}, f"wrote {ns.out}")
    else:
        _emit(ns, {"text": text}, text.rstrip("\n"))
    return 0


# ---------------------------------------------------------------------------
# wiring

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine readable output")
    common.add_argument("--seed", type=int, default=0, help="default seed for random policies")

    p = argparse.ArgumentParser(prog="tml", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", parents=[common], help="parse and pretty print")
    sp.add_argument("file")
    sp.set_defaults(func=_cmd_parse)

    sp = sub.add_parser("simulate", parents=[common], help="run under a scheduling policy")
    sp.add_argument("file")
    sp.add_argument("--policy", default="fifo", help="fifo | random[:seed] | exhaustive[:max-forks]")
    sp.add_argument("--bind", action="append", metavar="NAME=VALUE", help="entry block variable binding")
    sp.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    sp.add_argument("--max-ticks", type=int, default=DEFAULT_MAX_TICKS)
    sp.add_argument("--trace", metavar="FILE", help="write a JSONL step log")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("analyze", parents=[common], help="types, equations, and a concrete bound")
    sp.add_argument("file")
    sp.add_argument("--symbol", help="method to evaluate (default: entry block or sole method)")
    sp.add_argument("--args", action="append", metavar="NAME=VALUE", help="method arguments")
    sp.add_argument("--capacity", metavar="VALUE", help="capacity for the method's cog")
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--dump-btypes", action="store_true", help="print only behavioural types")
    sp.add_argument("--dump-equations", action="store_true", help="print only cost equations")
    sp.set_defaults(func=_cmd_analyze)

    sp = sub.add_parser("check", parents=[common], help="compare simulated runs against bounds")
    sp.add_argument("file")
    sp.add_argument("--args", action="append", metavar="NAME=A..B", help="argument grid")
    sp.add_argument("--max-forks", type=int, default=256)
    sp.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    sp.add_argument("--max-ticks", type=int, default=DEFAULT_MAX_TICKS)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("emit-cofloco", parents=[common], help="emit solver input clauses")
    sp.add_argument("file")
    sp.add_argument("--capacity", action="append", metavar="NAME=VALUE", help="capacity variable binding")
    sp.add_argument("--symbol", action="append", help="emit only equations reachable from here")
    sp.add_argument("--out", metavar="FILE", help="write clauses to a file")
    sp.set_defaults(func=_cmd_emit_cofloco)
    return p


def _report_error(ns, exc: TmlError) -> None:
    if getattr(ns, "json", False):
        err: dict = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, MethodTypingErrors):
            err["failures"] = [
                {"method": m, "type": type(e).__name__, "message": str(e)}
                for m, e in exc.failures
            ]
        print(json.dumps({"error": err}))
    else:
        print(f"error: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except UsageError as e:
        if getattr(ns, "json", False):
            print(json.dumps({"error": {"type": "usage", "message": str(e)}}))
        else:
            print(f"error: {e}", file=sys.stderr)
        return 2
    except TmlError as e:
        _report_error(ns, e)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
