"""Concrete evaluation and solver-input emission for cost equation systems.

eval_cost unfolds the equations at a numeric argument point: among the
equations of a symbol whose guards hold, each body is evaluated with its
applications resolved recursively and the results are maxed. Evaluation
is exact over rationals. Two degenerate shapes are reported instead of
looping: a recursive call whose arguments fail to decrease below a call
already being evaluated (unbounded), and systems that keep producing new
points past the unfolding budget (budget exhausted).

emit_cofloco renders the system as integer cost relations, one
    eq(head,cost,[calls],[constraints]).
clause per line. Rational job costs c/x cannot be written directly, so
the head carries a reciprocal variable E standing for 1/x, pinned by a
constraint v*E=1 once x is bound to the concrete capacity v; the cost
c/x then becomes c*nat(E). The scheme only works when every capacity a
call passes along is either the caller's own capacity or a constant;
anything else (say a call on a cog twice as fast) has no linear
encoding and raises UnboundDenominator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .costgen import CApp, CLin, CMax, CRatio, CSum, CostExpr, CostSystem
from .errors import (
    ArityMismatch,
    DivisionByZero,
    NoApplicableEquation,
    UnboundDenominator,
    UndefinedSymbol,
)
from .sizes import EQ, LE, LT, NE, And, Cmp, Lin, Or, SizeExpr, eval_guard, lin_eval, lin_neg, lin_scale

DEFAULT_BUDGET = 10**4

_ZERO = Fraction(0)


class Sentinel:
    """Non-numeric evaluation outcome; compares by identity."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __str__(self) -> str:
        return self.name


UNBOUNDED = Sentinel("unbounded")
BUDGET_EXHAUSTED = Sentinel("budget-exhausted")


def _apps_in(e: CostExpr) -> Iterator[CApp]:
    if isinstance(e, CApp):
        yield e
    elif isinstance(e, CSum):
        for p in e.parts:
            yield from _apps_in(p)
    elif isinstance(e, CMax):
        for a in e.alts:
            yield from _apps_in(a)


# ---------------------------------------------------------------------------
# evaluation

def _c_add(a, b):
    if UNBOUNDED is a or UNBOUNDED is b:
        return UNBOUNDED
    if BUDGET_EXHAUSTED is a or BUDGET_EXHAUSTED is b:
        return BUDGET_EXHAUSTED
    return a + b


def _c_max(a, b):
    if UNBOUNDED is a or UNBOUNDED is b:
        return UNBOUNDED
    if BUDGET_EXHAUSTED is a or BUDGET_EXHAUSTED is b:
        return BUDGET_EXHAUSTED
    return max(a, b)


def _nat(v):
    if isinstance(v, Fraction) and v < 0:
        return _ZERO
    return v


def _eval_body(e: CostExpr, env: Mapping[str, Fraction], resolve) -> "Fraction | Sentinel":
    if isinstance(e, CLin):
        return lin_eval(e.lin, env, _ZERO)
    if isinstance(e, CRatio):
        den = lin_eval(e.den, env, _ZERO)
        if den == 0:
            raise DivisionByZero(f"capacity '{e.den}' evaluates to zero")
        return lin_eval(e.num, env, _ZERO) / den
    if isinstance(e, CApp):
        return resolve((e.name, tuple(lin_eval(a, env, _ZERO) for a in e.args)))
    if isinstance(e, CSum):
        total = _ZERO
        for p in e.parts:
            total = _c_add(total, _eval_body(p, env, resolve))
        return total
    if isinstance(e, CMax):
        best = None
        for a in e.alts:
            v = _eval_body(a, env, resolve)
            best = v if best is None else _c_max(best, v)
        return best
    raise AssertionError(e)


def _no_smaller(prev: tuple, cur: tuple) -> bool:
    return len(prev) == len(cur) and all(p <= c for p, c in zip(prev, cur))


@dataclass
class _Frame:
    key: tuple
    pairs: list
    calls: list
    judged: dict = field(default_factory=dict)
    next: int = 0


def eval_cost(
    sys: CostSystem,
    symbol: str,
    args: Sequence,
    budget: int = DEFAULT_BUDGET,
) -> "Fraction | Sentinel":
    """Worst-case bound for `symbol` at the given numeric arguments.

    Returns an exact Fraction, or UNBOUNDED when the unfolding revisits a
    point no smaller than one still being evaluated, or BUDGET_EXHAUSTED
    when more than `budget` distinct points get unfolded. The memo table
    lives and dies with this call.
    """
    sys.equations_for(symbol)
    info = sys.symbols[symbol]
    vals = tuple(Fraction(a) for a in args)
    if len(vals) != len(info.formals):
        raise ArityMismatch(
            f"'{symbol}' takes {len(info.formals)} arguments, got {len(vals)}"
        )
    if budget <= 0:
        return BUDGET_EXHAUSTED

    memo: dict = {}
    on_path: dict = {}
    frames: list = []
    remaining = budget

    def applicable(sym: str, a: tuple) -> list:
        pairs = []
        for eq in sys.equations_for(sym):
            if len(a) != len(eq.formals):
                raise ArityMismatch(
                    f"'{sym}' takes {len(eq.formals)} arguments, got {len(a)}"
                )
            env = dict(zip(eq.formals, a))
            if all(eval_guard(g, env, _ZERO) for g in eq.guards):
                pairs.append((eq, env))
        if not pairs:
            point = ", ".join(str(v) for v in a)
            raise NoApplicableEquation(f"no equation for '{sym}' applies at ({point})")
        return pairs

    def expand(key: tuple) -> None:
        nonlocal remaining
        remaining -= 1
        sym, a = key
        pairs = applicable(sym, a)
        calls = []
        for eq, env in pairs:
            for app in _apps_in(eq.body):
                calls.append(
                    (app.name, tuple(lin_eval(x, env, _ZERO) for x in app.args))
                )
        frames.append(_Frame(key, pairs, calls))
        on_path.setdefault(sym, []).append(a)

    expand((symbol, vals))
    while frames:
        fr = frames[-1]
        if fr.next < len(fr.calls):
            ck = fr.calls[fr.next]
            fr.next += 1
            if ck in fr.judged or ck in memo:
                continue
            csym, cargs = ck
            if any(_no_smaller(p, cargs) for p in on_path.get(csym, ())):
                fr.judged[ck] = UNBOUNDED
            elif remaining <= 0:
                fr.judged[ck] = BUDGET_EXHAUSTED
            else:
                expand(ck)
        else:
            def resolve(key, _fr=fr):
                return _fr.judged[key] if key in _fr.judged else memo[key]

            best = None
            for eq, env in fr.pairs:
                v = _nat(_eval_body(eq.body, env, resolve))
                best = v if best is None else _c_max(best, v)
            memo[fr.key] = best
            on_path[fr.key[0]].pop()
            frames.pop()
    return memo[(symbol, vals)]


# ---------------------------------------------------------------------------
# solver-input emission

class _Unsat(Exception):
    """A guard conjunct is identically false; the clause is dropped."""


def _int_scaled(lin: Lin) -> Lin:
    m = lcm(lin.const.denominator, *(c.denominator for _, c in lin.terms)) if lin.terms else lin.const.denominator
    return lin_scale(lin, Fraction(m))


def _frac_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _terms_str(terms, vmap: Mapping[str, str]) -> str:
    out = ""
    for v, c in terms:
        name = vmap[v]
        if c == 1:
            piece = name
        elif c == -1:
            piece = "-" + name
        else:
            piece = f"{_frac_str(c)}*{name}"
        if out and not piece.startswith("-"):
            out += "+" + piece
        else:
            out += piece
    return out


def _lin_str(lin: Lin, vmap: Mapping[str, str]) -> str:
    s = _terms_str(lin.terms, vmap)
    if not s:
        return _frac_str(lin.const)
    if lin.const > 0:
        s += f"+{_frac_str(lin.const)}"
    elif lin.const < 0:
        s += f"-{_frac_str(-lin.const)}"
    return s


def _constraint_str(cmp: Cmp, vmap: Mapping[str, str]) -> Optional[str]:
    """One integer linear constraint, or None when trivially true.

    lin <= 0 becomes -terms >= const; strict < tightens to <= -1 first,
    which is exact because every quantity is integral after scaling."""
    lin = _int_scaled(cmp.lin)
    c = lin.const
    if cmp.op == LE:
        if not lin.terms:
            if c <= 0:
                return None
            raise _Unsat
        return f"{_terms_str(lin_neg(lin).terms, vmap)}>={_frac_str(c)}"
    if cmp.op == LT:
        if not lin.terms:
            if c < 0:
                return None
            raise _Unsat
        return f"{_terms_str(lin_neg(lin).terms, vmap)}>={_frac_str(c + 1)}"
    if cmp.op == EQ:
        if not lin.terms:
            if c == 0:
                return None
            raise _Unsat
        return f"{_terms_str(lin.terms, vmap)}={_frac_str(-c)}"
    raise AssertionError(cmp.op)


def _guard_variants(g: SizeExpr) -> list:
    """Expand a guard into disjunct-free conjunction lists.

    Disequalities and disjunctions both split the clause; an empty
    disjunction yields no variants at all, dropping the clause."""
    if isinstance(g, Lin):
        g = Cmp(NE, g)
    if isinstance(g, Cmp):
        if g.op == NE:
            return [[Cmp(LT, g.lin)], [Cmp(LT, lin_neg(g.lin))]]
        return [[g]]
    if isinstance(g, And):
        out = [[]]
        for p in g.parts:
            out = [a + b for a in out for b in _guard_variants(p)]
        return out
    if isinstance(g, Or):
        out = []
        for p in g.parts:
            out.extend(_guard_variants(p))
        return out
    raise AssertionError(g)


def _alternatives(e: CostExpr) -> list:
    """Max-free part lists, one per clause, operand order preserved."""
    if isinstance(e, CMax):
        out = []
        for a in e.alts:
            out.extend(_alternatives(a))
        return out
    if isinstance(e, CSum):
        out = [[]]
        for p in e.parts:
            out = [x + y for x in out for y in _alternatives(p)]
        return out
    return [[e]]


def _head_vars(formals: tuple, cap_formal: Optional[str]) -> dict:
    vmap: dict = {}
    used = set()
    for f in formals:
        name = "E" if f == cap_formal else f.upper()
        base, i = name, 0
        while name in used:
            i += 1
            name = f"{base}{i}"
        used.add(name)
        vmap[f] = name
    return vmap


class _LineState:
    """Per-clause bookkeeping for fresh reciprocal variables."""

    def __init__(self, vmap: dict, bindings: Mapping[str, Fraction], cap_formal: Optional[str]):
        self.vmap = vmap
        self.bindings = bindings
        self.cap_formal = cap_formal
        self.extra: list = []
        self._counter = 0

    def fresh_reciprocal(self, capacity: Fraction) -> str:
        if capacity == 0:
            raise DivisionByZero("capacity argument is zero")
        while True:
            self._counter += 1
            name = f"E{self._counter}"
            if name not in self.vmap.values():
                break
        p, q = capacity.numerator, capacity.denominator
        self.extra.append(f"{name}={q}" if p == 1 else f"{p}*{name}={q}")
        return name

    def reciprocal_of(self, var: str) -> str:
        """Reciprocal variable for a denominator occurrence of `var`."""
        if var == self.cap_formal:
            if var not in self.bindings:
                raise UnboundDenominator(var, "appears in a denominator")
            return self.vmap[var]
        if var in self.bindings:
            return self.fresh_reciprocal(self.bindings[var])
        raise UnboundDenominator(var, "appears in a denominator")


def _cost_str(parts: list, state: _LineState) -> str:
    pieces = []
    for p in parts:
        if isinstance(p, CLin):
            if p.lin.is_const:
                if p.lin.const != 0:
                    pieces.append(_frac_str(p.lin.const))
            else:
                pieces.append(f"nat({_lin_str(p.lin, state.vmap)})")
        elif isinstance(p, CRatio):
            pieces.append(_ratio_str(p, state))
        else:
            raise AssertionError(p)
    return "+".join(pieces) if pieces else "0"


def _ratio_str(r: CRatio, state: _LineState) -> str:
    den = r.den
    if den.is_const:
        if den.const == 0:
            raise DivisionByZero("constant zero denominator")
        scaled = lin_scale(r.num, 1 / den.const)
        return _frac_str(scaled.const) if scaled.is_const else f"nat({_lin_str(scaled, state.vmap)})"
    if den.const != 0 or len(den.terms) != 1:
        var = den.terms[0][0] if den.terms else str(den)
        raise UnboundDenominator(var, f"denominator '{den}' is not a single capacity variable")
    var, coeff = den.terms[0]
    ename = state.reciprocal_of(var)
    num = lin_scale(r.num, 1 / coeff)
    if num.is_const:
        return f"nat({ename})" if num.const == 1 else f"{_frac_str(num.const)}*nat({ename})"
    return f"nat({_lin_str(num, state.vmap)})*nat({ename})"


def _call_str(app: CApp, callee_cap_at: Optional[int], caller_cap: Optional[str], state: _LineState) -> str:
    rendered = []
    for i, a in enumerate(app.args):
        if i == callee_cap_at:
            if (
                caller_cap is not None
                and a.const == 0
                and a.terms == ((caller_cap, Fraction(1)),)
            ):
                rendered.append(state.vmap[caller_cap])
            elif a.is_const:
                rendered.append(state.fresh_reciprocal(a.const))
            else:
                raise UnboundDenominator(
                    a.terms[0][0],
                    f"capacity argument '{a}' of '{app.name}' is neither a "
                    "constant nor the caller's own capacity",
                )
        else:
            rendered.append(_lin_str(a, state.vmap))
    return f"{app.name}({','.join(rendered)})"


def _reachable(sys: CostSystem, roots: Iterable[str]) -> set:
    seen: set = set()
    work = list(roots)
    while work:
        s = work.pop()
        if s in seen:
            continue
        seen.add(s)
        for eq in sys.equations_for(s):
            for app in _apps_in(eq.body):
                if app.name not in seen:
                    work.append(app.name)
    return seen


def emit_cofloco(
    sys: CostSystem,
    capacity_bindings: Mapping[str, Fraction],
    symbols: Optional[Iterable[str]] = None,
) -> str:
    """Render the system as cost relation clauses, one per line.

    capacity_bindings maps capacity variable names to concrete values;
    every variable that ends up in a denominator must be bound. When
    `symbols` is given, only equations reachable from those roots are
    emitted, in system order.
    """
    bindings = {k: Fraction(v) for k, v in capacity_bindings.items()}
    keep = _reachable(sys, symbols) if symbols is not None else None
    lines = []
    for eq in sys.equations:
        if keep is not None and eq.name not in keep:
            continue
        info = sys.symbols[eq.name]
        vmap = _head_vars(eq.formals, info.cap_formal)
        head = f"{eq.name}({','.join(vmap[f] for f in eq.formals)})"
        cap_constraint = None
        if info.cap_formal is not None and info.cap_formal in bindings:
            v = bindings[info.cap_formal]
            p, q = v.numerator, v.denominator
            e = vmap[info.cap_formal]
            cap_constraint = f"{e}={q}" if p == 1 else f"{p}*{e}={q}"
        callee_cap_at = {
            name: (si.formals.index(si.cap_formal) if si.cap_formal is not None else None)
            for name, si in sys.symbols.items()
        }
        try:
            variants = _guard_variants(And(eq.guards))
        except _Unsat:
            variants = []
        alts = _alternatives(eq.body)
        for conj in variants:
            try:
                constraints = [
                    s for c in conj if (s := _constraint_str(c, vmap)) is not None
                ]
            except _Unsat:
                continue
            if cap_constraint is not None:
                constraints = constraints + [cap_constraint]
            for parts in alts:
                state = _LineState(vmap, bindings, info.cap_formal)
                cost = _cost_str([p for p in parts if not isinstance(p, CApp)], state)
                calls = [
                    _call_str(p, callee_cap_at.get(p.name), info.cap_formal, state)
                    for p in parts
                    if isinstance(p, CApp)
                ]
                lines.append(
                    f"eq({head},{cost},[{','.join(calls)}],"
                    f"[{','.join(constraints + state.extra)}])."
                )
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# canonical form for golden comparison

_KEYWORDS = {"eq", "nat"}


def canonicalize_cofloco(text: str) -> str:
    """Normalize clause text for comparison.

    Whitespace is dropped, functor names are renamed f1, f2, ... in order
    of first appearance across the whole text, and variables are renamed
    V1, V2, ... per clause. Clause order is preserved.
    """
    import re

    token = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+|\S")
    functors: dict = {}
    out_lines = []
    for raw in text.splitlines():
        line = "".join(raw.split())
        if not line:
            continue
        variables: dict = {}
        pieces = []
        for t in token.findall(line):
            if t[0].islower() and t not in _KEYWORDS and t[0].isalpha():
                if t not in functors:
                    functors[t] = f"f{len(functors) + 1}"
                pieces.append(functors[t])
            elif t[0].isupper() or t[0] == "_":
                if t not in variables:
                    variables[t] = f"V{len(variables) + 1}"
                pieces.append(variables[t])
            else:
                pieces.append(t)
        out_lines.append("".join(pieces))
    return "\n".join(out_lines)
