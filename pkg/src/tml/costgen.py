"""Cost equations from method summaries.

Each branch of a summary becomes one guarded equation. Walking the branch
left to right, synchronized costs (jobs, same-cog calls, waits on futures)
accumulate into the branch cost; asynchronous invocations are parked in a
pending-call environment and only charged at the first wait on their cog,
or, if never waited on, drained into the equation at the end. A wait on a
foreign cog runs in parallel with the carrier, so it contributes through a
max against the cost accumulated so far, not through a plain sum.

Cost expressions stay symbolic: capacities divide, method names apply,
sums and maxes normalize just enough that shared addends are factored out
of a max.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .btypes import (
    UNKNOWN,
    AsyncCallAtom,
    ChoiceB,
    CogVal,
    CostAtom,
    GuardedB,
    Leaf,
    MethodBType,
    NewCogAtom,
    ProgramBTypes,
    SeqB,
    Size,
    SyncAtom,
    SyncCallAtom,
    ZeroAtom,
)
from .errors import DivisionByZero, UndefinedSymbol
from .sizes import (
    TRUE,
    Lin,
    SizeExpr,
    conj_str,
    lin_add,
    lin_const,
    lin_scale,
    lin_var,
    render_lin,
)


# ---------------------------------------------------------------------------
# cost expressions

@dataclass(frozen=True)
class CLin:
    """A linear amount of time."""

    lin: Lin


@dataclass(frozen=True)
class CRatio:
    """num cycles on a symbolic capacity den."""

    num: Lin
    den: Lin


@dataclass(frozen=True)
class CApp:
    """The cost of running method name with the given size arguments,
    capacity first."""

    name: str
    args: tuple


@dataclass(frozen=True)
class CSum:
    parts: tuple


@dataclass(frozen=True)
class CMax:
    alts: tuple


CostExpr = Union[CLin, CRatio, CApp, CSum, CMax]

CZERO = CLin(lin_const(Fraction(0)))


def clin(v) -> CLin:
    return CLin(lin_const(Fraction(v)))


def cratio(num: Lin, den: Lin) -> CostExpr:
    """num/den, folded to a plain linear cost when den is a constant."""
    if den.is_const:
        if den.const == 0:
            raise DivisionByZero("cog capacity is zero")
        return CLin(lin_scale(num, 1 / den.const))
    if num.is_const and num.const == 0:
        return CZERO
    return CRatio(num, den)


def _summands(e: CostExpr) -> list:
    return list(e.parts) if isinstance(e, CSum) else [e]


def csum(*parts: CostExpr) -> CostExpr:
    """Sum, flattened; linear terms and same-capacity ratios merge at the
    position of their first appearance."""
    out: list = []
    lin_at: Optional[int] = None
    ratio_at: dict = {}
    for p in parts:
        for s in _summands(p):
            if isinstance(s, CLin):
                if lin_at is None:
                    lin_at = len(out)
                    out.append(s)
                else:
                    out[lin_at] = CLin(lin_add(out[lin_at].lin, s.lin))
            elif isinstance(s, CRatio):
                at = ratio_at.get(s.den)
                if at is None:
                    ratio_at[s.den] = len(out)
                    out.append(s)
                else:
                    out[at] = CRatio(lin_add(out[at].num, s.num), s.den)
            else:
                out.append(s)
    out = [s for s in out if not (isinstance(s, CLin) and s.lin.is_const and s.lin.const == 0)]
    if not out:
        return CZERO
    if len(out) == 1:
        return out[0]
    return CSum(tuple(out))


def cmax(*alts: CostExpr) -> CostExpr:
    """Max, flattened and deduplicated; addends shared by every alternative
    are factored out in front."""
    flat: list = []
    for a in alts:
        for x in (a.alts if isinstance(a, CMax) else (a,)):
            if x not in flat:
                flat.append(x)
    if len(flat) == 1:
        return flat[0]
    pools = [_summands(a) for a in flat]
    common: list = []
    for term in list(pools[0]):
        if all(term in pool for pool in pools):
            common.append(term)
            for pool in pools:
                pool.remove(term)
    if common:
        stripped = cmax(*(csum(*pool) for pool in pools))
        return csum(*common, stripped)
    return CMax(tuple(flat))


def cost_free_vars(e: CostExpr) -> set:
    if isinstance(e, CLin):
        return set(e.lin.free_vars())
    if isinstance(e, CRatio):
        return set(e.num.free_vars()) | set(e.den.free_vars())
    if isinstance(e, CApp):
        out: set = set()
        for a in e.args:
            out |= set(a.free_vars())
        return out
    if isinstance(e, (CSum, CMax)):
        out = set()
        for p in e.parts if isinstance(e, CSum) else e.alts:
            out |= cost_free_vars(p)
        return out
    raise AssertionError(e)


def _paren_lin(lin: Lin) -> str:
    text = render_lin(lin)
    parts = len(lin.terms) + (1 if lin.const != 0 else 0)
    if parts > 1 or (lin.terms and lin.terms[0][1] != 1):
        return f"({text})"
    return text


def render_cost(e: CostExpr) -> str:
    if isinstance(e, CLin):
        return render_lin(e.lin)
    if isinstance(e, CRatio):
        return f"{_paren_lin(e.num)}/{_paren_lin(e.den)}"
    if isinstance(e, CApp):
        return f"{e.name}({', '.join(render_lin(a) for a in e.args)})"
    if isinstance(e, CSum):
        return " + ".join(render_cost(p) for p in e.parts)
    if isinstance(e, CMax):
        return f"max({', '.join(render_cost(a) for a in e.alts)})"
    raise AssertionError(e)


# ---------------------------------------------------------------------------
# pending asynchronous calls

@dataclass(frozen=True)
class PendingCall:
    """An invocation whose future has not been waited on yet: the branch
    cost at the moment of the call, and where and what was invoked."""

    invoked_at: CostExpr
    method: str
    cog: str
    args: tuple  # size arguments, capacity first


def _strip_value(v, fresh) -> Lin:
    """The size of a value in equation position: capacities for objects,
    the expression itself for integers, a fresh unconstrained name for an
    opaque value."""
    if isinstance(v, Size):
        return v.se
    if isinstance(v, CogVal):
        return v.cap
    if v is UNKNOWN:
        return lin_var(fresh())
    raise AssertionError(v)


def _call_args(header: tuple, fresh) -> tuple:
    return tuple(_strip_value(v, fresh) for v in header)


def translate_atom(psi: dict, carrier: str, e: CostExpr, atom, fresh):
    """One atom against (pending calls, accumulated branch cost)."""
    if isinstance(atom, (ZeroAtom, NewCogAtom)):
        return psi, e
    if isinstance(atom, CostAtom):
        return psi, csum(e, cratio(atom.num, atom.den))
    if isinstance(atom, SyncCallAtom):
        return psi, csum(e, CApp(atom.method, _call_args(atom.header, fresh)))
    if isinstance(atom, AsyncCallAtom):
        callee = atom.header[0]
        psi2 = dict(psi)
        psi2[atom.fut] = PendingCall(
            e, atom.method, callee.cog, _call_args(atom.header, fresh)
        )
        return psi2, e
    if isinstance(atom, SyncAtom):
        pending = psi.get(atom.fut)
        if pending is None:
            return psi, e
        group = [f for f, p in psi.items() if p.cog == pending.cog]
        psi2 = {f: p for f, p in psi.items() if f not in group}
        costs = csum(*(CApp(psi[f].method, psi[f].args) for f in group))
        if pending.cog == carrier:
            # the waits serialize with the carrier's own thread
            return psi2, csum(e, costs)
        # a foreign cog runs in parallel: whichever finishes later wins
        started = cmax(*(psi[f].invoked_at for f in group))
        return psi2, cmax(e, csum(costs, started))
    raise AssertionError(atom)


def translate_btype(psi: dict, guards: tuple, e: CostExpr, b, carrier: str, fresh) -> list:
    """All branches of a summary as (pending, guard conjunction, cost)."""
    if isinstance(b, Leaf):
        psi2, e2 = translate_atom(psi, carrier, e, b.atom, fresh)
        return [(psi2, guards, e2)]
    if isinstance(b, SeqB):
        psi2, e2 = translate_atom(psi, carrier, e, b.atom, fresh)
        return translate_btype(psi2, guards, e2, b.rest, carrier, fresh)
    if isinstance(b, ChoiceB):
        return translate_btype(psi, guards, e, b.left, carrier, fresh) + translate_btype(
            psi, guards, e, b.right, carrier, fresh
        )
    if isinstance(b, GuardedB):
        g = guards if b.guard == TRUE else guards + (b.guard,)
        return translate_btype(psi, g, e, b.body, carrier, fresh)
    raise AssertionError(b)


def drain_pending(psi: dict, carrier: str, fresh) -> CostExpr:
    """The cost of the invocations a branch triggered but never waited on,
    counted from time zero as a trailing wait on each of them in order."""
    e: CostExpr = CZERO
    for f in list(psi):
        if f in psi:
            psi, e = translate_atom(psi, carrier, e, SyncAtom(f), fresh)
    return e


# ---------------------------------------------------------------------------
# equations

@dataclass(frozen=True)
class Equation:
    name: str
    formals: tuple
    body: CostExpr
    guards: tuple


@dataclass(frozen=True)
class SymbolInfo:
    formals: tuple
    cap_formal: Optional[str]  # None when the capacity is a constant


@dataclass
class CostSystem:
    equations: tuple
    symbols: dict  # name -> SymbolInfo, declaration order

    def equations_for(self, name: str) -> list:
        if name not in self.symbols:
            raise UndefinedSymbol(f"no equations for {name!r}")
        return [eq for eq in self.equations if eq.name == name]


def _formal_name(v) -> str:
    lin = v.se if isinstance(v, Size) else v.cap
    assert lin.const == 0 and len(lin.terms) == 1 and lin.terms[0][1] == 1, lin
    return lin.terms[0][0]


def _fresh_namer(taken: set):
    count = [0]

    def fresh() -> str:
        while True:
            count[0] += 1
            name = f"u{count[0]}"
            if name not in taken:
                taken.add(name)
                return name

    return fresh


def translate_method(mb: MethodBType) -> list:
    carrier = mb.this_val.cog
    if mb.this_val.cap.is_const:
        cap_formal = None
        formals: tuple = ()
    else:
        cap_formal = _formal_name(mb.this_val)
        formals = (cap_formal,)
    formals = formals + tuple(_formal_name(p) for p in mb.params)
    fresh = _fresh_namer(set(formals))
    eqs = []
    for psi, guards, cost in translate_btype({}, (), CZERO, mb.body, carrier, fresh):
        tail = drain_pending(psi, carrier, fresh)
        eqs.append(Equation(mb.name, formals, csum(cost, tail), guards))
    return eqs


def translate_program(pb: ProgramBTypes) -> CostSystem:
    summaries = list(pb.methods.values()) + [pb.main]
    equations: list = []
    symbols: dict = {}
    for mb in summaries:
        eqs = translate_method(mb)
        cap = eqs[0].formals[0] if not mb.this_val.cap.is_const else None
        symbols[mb.name] = SymbolInfo(eqs[0].formals, cap)
        equations.extend(eqs)
    for eq in equations:
        for app in _applications(eq.body):
            if app.name not in symbols:
                raise UndefinedSymbol(f"equation calls undefined {app.name!r}")
            if len(app.args) != len(symbols[app.name].formals):
                raise UndefinedSymbol(
                    f"call to {app.name!r} with {len(app.args)} arguments, "
                    f"expected {len(symbols[app.name].formals)}"
                )
    return CostSystem(tuple(equations), symbols)


def _applications(e: CostExpr) -> list:
    if isinstance(e, CApp):
        return [e]
    if isinstance(e, CSum):
        return [a for p in e.parts for a in _applications(p)]
    if isinstance(e, CMax):
        return [a for p in e.alts for a in _applications(p)]
    return []


def render_equation(eq: Equation) -> str:
    head = f"{eq.name}({', '.join(eq.formals)})"
    text = f"{head} = {render_cost(eq.body)}"
    if eq.guards:
        text += f" [{conj_str(eq.guards)}]"
    return text


def render_cost_system(sys: CostSystem) -> str:
    return "\n".join(render_equation(eq) for eq in sys.equations)
