"""Behavioural types: abstract method summaries for the time analysis.

A method body is summarized by a tree of atoms recording the only events
that matter for timing: processing costs (job), cog creations, synchronous
and asynchronous invocations, and synchronizations on futures. The summary
is derived by a typing pass over the syntax; integer data is tracked as
linear size expressions where possible and collapsed to the opaque value
"--" where not.

The pass also enforces the cog locality restrictions: synchronous calls
stay inside the carrier's cog, and asynchronous calls target either the
carrier's cog or a cog created in the current scope. Violations raise
RestrictionViolation.
"""

from dataclasses import dataclass
from typing import Optional, Union

from .ast import (
    Assign,
    AsyncCall,
    Get,
    If,
    Job,
    Main,
    MethodDecl,
    NewLocal,
    NewWith,
    Program,
    Pure,
    Return,
    Seq,
    SimpleType,
    Stmt,
    SyncCall,
    This,
    Var,
)
from .errors import (
    ArityMismatch,
    GetOnNonFuture,
    MethodTypingErrors,
    RestrictionViolation,
    ReturnTypeMismatch,
    TypingError,
    UnknownMethod,
)
from .sizes import (
    CAPACITY_VAR,
    And,
    Cmp,
    Lin,
    Or,
    SizeExpr,
    as_guard,
    classify_expr,
    guard_subst,
    is_complement,
    lin_const,
    lin_subst,
    lin_var,
    negate,
    render_guard,
    render_lin,
)

_GUARD_FORMS = (Cmp, And, Or)


# ---------------------------------------------------------------------------
# values

class Unknown:
    """The opaque value of a non-size expression, written --."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "--"


UNKNOWN = Unknown()


@dataclass(frozen=True)
class Size:
    """An integer tracked as a linear size expression."""

    se: Lin


@dataclass(frozen=True)
class CogVal:
    """An object value: the cog it lives in and that cog's capacity."""

    cog: str
    cap: Lin


@dataclass(frozen=True)
class FutVal:
    """A future name, held by a Fut-typed variable."""

    name: str


BasicValue = Union[Unknown, Size, CogVal]
ExtValue = Union[Unknown, Size, CogVal, FutVal]


def render_value(v) -> str:
    if v is UNKNOWN:
        return "--"
    if isinstance(v, Size):
        return render_lin(v.se)
    if isinstance(v, CogVal):
        return f"{v.cog}[{render_lin(v.cap)}]"
    if isinstance(v, FutVal):
        return v.name
    raise AssertionError(v)


# ---------------------------------------------------------------------------
# atoms and behavioural types

@dataclass(frozen=True)
class CostAtom:
    """Processing cost num/den: num cycles on a cog of capacity den."""

    num: Lin
    den: Lin


@dataclass(frozen=True)
class NewCogAtom:
    cog: str
    cap: Lin


@dataclass(frozen=True)
class SyncCallAtom:
    method: str
    header: tuple  # callee value first, then argument values
    ret: object


@dataclass(frozen=True)
class AsyncCallAtom:
    fut: str
    method: str
    header: tuple
    ret: object


@dataclass(frozen=True)
class SyncAtom:
    """First synchronization on a future: the wait happens here."""

    fut: str


@dataclass(frozen=True)
class ZeroAtom:
    pass


Atom = Union[CostAtom, NewCogAtom, SyncCallAtom, AsyncCallAtom, SyncAtom, ZeroAtom]

ZERO = ZeroAtom()


@dataclass
class Leaf:
    atom: Atom
    env: Optional["TypeEnv"]  # None once the summary is finalized


@dataclass
class SeqB:
    atom: Atom
    rest: "BType"


@dataclass
class ChoiceB:
    left: "BType"
    right: "BType"


@dataclass
class GuardedB:
    guard: SizeExpr
    body: "BType"


BType = Union[Leaf, SeqB, ChoiceB, GuardedB]


@dataclass(frozen=True)
class Signature:
    """Header and return value of a method summary."""

    this_val: CogVal
    params: tuple
    ret: object


@dataclass
class MethodBType:
    name: str
    this_val: CogVal
    params: tuple
    body: BType
    ret: object

    @property
    def header(self) -> tuple:
        return (self.this_val,) + self.params


@dataclass
class ProgramBTypes:
    methods: dict  # name -> MethodBType, declaration order
    main: MethodBType


# ---------------------------------------------------------------------------
# typing environment

@dataclass
class TypeEnv:
    methods: dict  # name -> Signature, shared and never mutated
    vars: dict  # name -> ExtValue
    futures: dict  # future name -> (checked, value)
    cogs: dict  # locally created cog name -> capacity

    def copy(self) -> "TypeEnv":
        return TypeEnv(self.methods, dict(self.vars), dict(self.futures), dict(self.cogs))


class Namer:
    """Fresh cog and future names for one method summary.

    A future is named after the variable it is assigned to when that name
    is still free, so summaries read like the source; cogs draw from the
    pool d, d2, ... regardless of the target variable.
    """

    _FUTS = ("f", "g", "h")

    def __init__(self, avoid=()):
        self.avoid = set(avoid)
        self.used: set = set()
        self.futs = 0
        self.cogs = 0

    def fut(self, hint: Optional[str] = None) -> str:
        if hint is not None and hint not in self.used:
            self.used.add(hint)
            return hint
        while True:
            n = self.futs
            self.futs += 1
            name = self._FUTS[n] if n < len(self._FUTS) else f"f{n + 1}"
            if name not in self.avoid and name not in self.used:
                self.used.add(name)
                return name

    def cog(self) -> str:
        while True:
            self.cogs += 1
            name = "d" if self.cogs == 1 else f"d{self.cogs}"
            if name not in self.avoid and name not in self.used:
                self.used.add(name)
                return name


def _pick(base: str, taken) -> str:
    if base not in taken:
        return base
    i = 2
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def _is_int(t) -> bool:
    return isinstance(t, SimpleType) and t.name == "Int"


# ---------------------------------------------------------------------------
# signature bootstrap

def _return_exprs(s: Stmt) -> list:
    if isinstance(s, Return):
        return [s.value]
    if isinstance(s, Seq):
        return _return_exprs(s.head) + _return_exprs(s.tail)
    if isinstance(s, If):
        return _return_exprs(s.then_branch) + _return_exprs(s.else_branch)
    return []


def _assigned_vars(s: Stmt, acc: set) -> set:
    if isinstance(s, Assign):
        acc.add(s.target)
    elif isinstance(s, Seq):
        _assigned_vars(s.head, acc)
        _assigned_vars(s.tail, acc)
    elif isinstance(s, If):
        _assigned_vars(s.then_branch, acc)
        _assigned_vars(s.else_branch, acc)
    return acc


def _infer_return(m: MethodDecl) -> object:
    """A size return value only when every path returns the same linear
    expression over never-reassigned parameters; anything else is --."""
    if m.ret_type.name != "Int":
        return UNKNOWN
    exprs = _return_exprs(m.body)
    if not exprs:
        return UNKNOWN
    stable = {p.name for p in m.params} - _assigned_vars(m.body, set())
    seen = None
    for e in exprs:
        cls = classify_expr(e)
        if not isinstance(cls, Lin):
            return UNKNOWN
        if any(v not in stable for v in cls.free_vars()):
            return UNKNOWN
        if seen is None:
            seen = cls
        elif cls != seen:
            return UNKNOWN
    return Size(seen)


def bootstrap_signatures(program: Program) -> dict:
    """Symbolic headers for every method.

    The carrier is typed as a fresh cog of symbolic capacity; Int parameters
    become size names (their own names), Class parameters become objects of
    fresh foreign cogs. That last choice is what rejects methods which call
    an argument asynchronously: the argument's cog is neither the carrier's
    nor locally created.
    """
    sigs: dict = {}
    for m in program.methods:
        taken = {p.name for p in m.params} | {d.name for d in m.locals_}
        cap = _pick("x", taken)
        this_val = CogVal(_pick("c", taken), lin_var(cap))
        params = []
        for p in m.params:
            if _is_int(p.type):
                params.append(Size(lin_var(p.name)))
            else:
                params.append(CogVal(f"c_{p.name}", lin_var(_pick(f"x_{p.name}", taken))))
        sigs[m.name] = Signature(this_val, tuple(params), _infer_return(m))
    return sigs


def main_param_names(main: Main) -> list:
    """Int locals of the entry point never assigned in its body: these are
    the symbolic inputs of the whole program."""
    assigned = _assigned_vars(main.body, set()) if main.body is not None else set()
    return [d.name for d in main.locals_ if _is_int(d.type) and d.name not in assigned]


# ---------------------------------------------------------------------------
# expression typing

def type_expr(env: TypeEnv, e) -> ExtValue:
    if isinstance(e, Var):
        if e.name not in env.vars:
            raise TypingError(f"undeclared variable {e.name!r}")
        return env.vars[e.name]
    if isinstance(e, This):
        return env.vars["this"]
    cls = classify_expr(e)
    if isinstance(cls, Lin):
        se = _subst_sizes(env, cls)
        return UNKNOWN if se is None else Size(se)
    return UNKNOWN


def _size_mapping(env: TypeEnv) -> dict:
    this = env.vars["this"]
    mapping: dict = {CAPACITY_VAR: this.cap}
    for name, v in env.vars.items():
        if isinstance(v, Size):
            mapping[name] = v.se
        elif name != "this":
            mapping[name] = None
    return mapping


def _subst_sizes(env: TypeEnv, lin: Lin) -> Optional[Lin]:
    return lin_subst(lin, _size_mapping(env))


def _guard_of(env: TypeEnv, e) -> Optional[SizeExpr]:
    """The condition of a branch as a size guard, or None when the
    condition escapes the linear fragment."""
    cls = classify_expr(e)
    if isinstance(cls, Lin):
        se = _subst_sizes(env, cls)
        return None if se is None else as_guard(se)
    if isinstance(cls, _GUARD_FORMS):
        return guard_subst(cls, _size_mapping(env))
    return None


# ---------------------------------------------------------------------------
# signature instantiation

def instantiate_signature(sig: Signature, this_val: CogVal, args, namer: "Namer"):
    """Match actual values against a symbolic header.

    Returns the instantiated header and return value. Header names bind the
    return value; free names in it denote cogs created by the callee and are
    freshened per call site.
    """
    if len(args) != len(sig.params):
        raise ArityMismatch(
            f"expected {len(sig.params)} arguments, got {len(args)}"
        )
    cog_subst: dict = {sig.this_val.cog: this_val.cog}
    sizes: dict = {v: this_val.cap for v in sig.this_val.cap.free_vars()}
    header = [this_val]
    for formal, actual in zip(sig.params, args):
        if isinstance(actual, FutVal):
            actual = UNKNOWN
        if isinstance(formal, Size):
            if isinstance(actual, CogVal):
                raise TypingError("object value passed for an integer parameter")
            for v in formal.se.free_vars():
                sizes[v] = actual.se if isinstance(actual, Size) else None
            header.append(actual)
        else:  # CogVal formal
            if isinstance(actual, Size):
                raise TypingError("integer value passed for an object parameter")
            if isinstance(actual, CogVal):
                cog_subst[formal.cog] = actual.cog
                for v in formal.cap.free_vars():
                    sizes[v] = actual.cap
            else:
                for v in formal.cap.free_vars():
                    sizes[v] = None
            header.append(actual)
    ret = sig.ret
    if isinstance(ret, Size):
        se = lin_subst(ret.se, {v: sizes.get(v) for v in ret.se.free_vars()})
        ret = UNKNOWN if se is None else Size(se)
    elif isinstance(ret, CogVal):
        cog = cog_subst.get(ret.cog) or namer.cog()
        se = lin_subst(ret.cap, {v: sizes.get(v) for v in ret.cap.free_vars()})
        ret = UNKNOWN if se is None else CogVal(cog, se)
    return tuple(header), ret


# ---------------------------------------------------------------------------
# rhs and statement typing

def type_rhs(env: TypeEnv, rhs, namer: Namer, hint: Optional[str] = None):
    """Type an assignment right-hand side: value, atom, updated environment.

    hint is the assignment target, used to name the future of an
    asynchronous call after the variable that holds it.
    """
    if isinstance(rhs, Pure):
        return type_expr(env, rhs.expr), ZERO, env
    if isinstance(rhs, NewWith):
        cap = type_expr(env, rhs.capacity)
        if not isinstance(cap, Size):
            raise TypingError("cog capacity is not a size expression")
        c = namer.cog()
        env2 = env.copy()
        env2.cogs[c] = cap.se
        return CogVal(c, cap.se), NewCogAtom(c, cap.se), env2
    if isinstance(rhs, NewLocal):
        this = env.vars["this"]
        return CogVal(this.cog, this.cap), ZERO, env
    if isinstance(rhs, AsyncCall):
        callee = type_expr(env, rhs.callee)
        if not isinstance(callee, CogVal):
            raise TypingError("callee of an invocation is not an object value")
        this = env.vars["this"]
        if callee.cog != this.cog and callee.cog not in env.cogs:
            raise RestrictionViolation(
                f"invocation on cog {callee.cog!r}, which is neither the "
                "carrier's cog nor one created in this scope"
            )
        header, ret = _call_parts(env, rhs.method, callee, rhs.args, namer)
        f = namer.fut(hint)
        env2 = env.copy()
        env2.futures[f] = (False, ret)
        return FutVal(f), AsyncCallAtom(f, rhs.method, header, ret), env2
    if isinstance(rhs, SyncCall):
        callee = type_expr(env, rhs.callee)
        if not isinstance(callee, CogVal):
            raise TypingError("callee of an invocation is not an object value")
        this = env.vars["this"]
        if callee.cog != this.cog:
            raise RestrictionViolation(
                f"synchronous invocation on cog {callee.cog!r} from cog "
                f"{this.cog!r}; synchronous calls stay inside the carrier's cog"
            )
        header, ret = _call_parts(env, rhs.method, callee, rhs.args, namer)
        return ret, SyncCallAtom(rhs.method, header, ret), env
    if isinstance(rhs, Get):
        v = type_expr(env, rhs.expr)
        if not isinstance(v, FutVal):
            raise GetOnNonFuture("get on a non-future value")
        checked, t = env.futures[v.name]
        if checked:
            return t, ZERO, env
        env2 = env.copy()
        env2.futures[v.name] = (True, t)
        return t, SyncAtom(v.name), env2
    raise AssertionError(rhs)


def _call_parts(env: TypeEnv, method: str, callee: CogVal, args, namer: Namer):
    sig = env.methods.get(method)
    if sig is None:
        raise UnknownMethod(f"call to unknown method {method!r}")
    vals = [type_expr(env, a) for a in args]
    return instantiate_signature(sig, callee, vals, namer)


def type_stmt(env: TypeEnv, s: Stmt, namer: Namer) -> BType:
    if isinstance(s, Seq):
        first = type_stmt(env, s.head, namer)
        return _graft(first, s.tail, namer)
    if isinstance(s, Assign):
        v, atom, env2 = type_rhs(env, s.rhs, namer, hint=s.target)
        env3 = env2.copy()
        env3.vars[s.target] = v
        return Leaf(atom, env3)
    if isinstance(s, Job):
        amount = type_expr(env, s.amount)
        if not isinstance(amount, Size):
            raise TypingError("job amount is not a size expression")
        return Leaf(CostAtom(amount.se, env.vars["this"].cap), env)
    if isinstance(s, Return):
        t = type_expr(env, s.value)
        destiny = env.vars["destiny"]
        if not _return_compatible(destiny, t):
            raise ReturnTypeMismatch(
                f"returned value {render_value(t)} does not match the "
                f"declared summary {render_value(destiny)}"
            )
        return Leaf(ZERO, env)
    if isinstance(s, If):
        g = _guard_of(env, s.cond)
        left = type_stmt(env.copy(), s.then_branch, namer)
        right = type_stmt(env.copy(), s.else_branch, namer)
        if g is None:
            return ChoiceB(left, right)
        neg = negate(g)
        assert is_complement(g, neg)
        return ChoiceB(GuardedB(g, left), GuardedB(neg, right))
    raise AssertionError(s)


def _return_compatible(destiny, t) -> bool:
    if destiny is UNKNOWN:
        return True
    return destiny == t


def _graft(b: BType, s: Stmt, namer: Namer) -> BType:
    """Sequence a statement after every leaf, typing it per-leaf so that
    environment updates made on one branch stay on that branch."""
    if isinstance(b, Leaf):
        return SeqB(b.atom, type_stmt(b.env, s, namer))
    if isinstance(b, SeqB):
        return SeqB(b.atom, _graft(b.rest, s, namer))
    if isinstance(b, ChoiceB):
        return ChoiceB(_graft(b.left, s, namer), _graft(b.right, s, namer))
    if isinstance(b, GuardedB):
        return GuardedB(b.guard, _graft(b.body, s, namer))
    raise AssertionError(b)


def erase_envs(b: BType) -> BType:
    if isinstance(b, Leaf):
        return Leaf(b.atom, None)
    if isinstance(b, SeqB):
        return SeqB(b.atom, erase_envs(b.rest))
    if isinstance(b, ChoiceB):
        return ChoiceB(erase_envs(b.left), erase_envs(b.right))
    if isinstance(b, GuardedB):
        return GuardedB(b.guard, erase_envs(b.body))
    raise AssertionError(b)


# ---------------------------------------------------------------------------
# methods and programs

def _initial_locals(env: TypeEnv, locals_) -> None:
    for d in locals_:
        if _is_int(d.type):
            env.vars[d.name] = Size(lin_var(d.name))
        else:
            env.vars[d.name] = UNKNOWN


def type_method(sig_table: dict, m: MethodDecl) -> MethodBType:
    sig = sig_table[m.name]
    namer = Namer(avoid={p.name for p in m.params} | {d.name for d in m.locals_})
    env = TypeEnv(sig_table, {}, {}, {})
    env.vars["this"] = sig.this_val
    env.vars["destiny"] = sig.ret
    for p, v in zip(m.params, sig.params):
        env.vars[p.name] = v
    _initial_locals(env, m.locals_)
    body = erase_envs(type_stmt(env, m.body, namer))
    return MethodBType(m.name, sig.this_val, sig.params, body, sig.ret)


def type_main(sig_table: dict, main: Main) -> MethodBType:
    this_val = CogVal("start", lin_const(main.capacity))
    namer = Namer(avoid={d.name for d in main.locals_})
    env = TypeEnv(sig_table, {}, {}, {})
    env.vars["this"] = this_val
    env.vars["destiny"] = UNKNOWN
    _initial_locals(env, main.locals_)
    if main.body is None:
        body: BType = Leaf(ZERO, None)
    else:
        body = erase_envs(type_stmt(env, main.body, namer))
    params = tuple(Size(lin_var(n)) for n in main_param_names(main))
    return MethodBType("main", this_val, params, body, UNKNOWN)


def type_program(program: Program) -> ProgramBTypes:
    """Summarize every method and the entry point.

    All failures are gathered before reporting, so one broken method does
    not hide another's error.
    """
    sig_table = bootstrap_signatures(program)
    failures = []
    methods: dict = {}
    for m in program.methods:
        try:
            methods[m.name] = type_method(sig_table, m)
        except TypingError as err:
            failures.append((m.name, err))
    main = None
    try:
        main = type_main(sig_table, program.main)
    except TypingError as err:
        failures.append(("main", err))
    if failures:
        raise MethodTypingErrors(failures)
    return ProgramBTypes(methods, main)


# ---------------------------------------------------------------------------
# rendering

def _maybe_paren(lin: Lin) -> str:
    text = render_lin(lin)
    parts = len(lin.terms) + (1 if lin.const != 0 else 0)
    if parts > 1 or (lin.terms and lin.terms[0][1] != 1):
        return f"({text})"
    return text


def render_atom(a: Atom) -> str:
    if isinstance(a, CostAtom):
        if a.den.is_const and a.den.const == 1:
            return render_lin(a.num)
        return f"{_maybe_paren(a.num)}/{_maybe_paren(a.den)}"
    if isinstance(a, NewCogAtom):
        return f"new {a.cog}[{render_lin(a.cap)}]"
    if isinstance(a, SyncCallAtom):
        args = ", ".join(render_value(v) for v in a.header)
        return f"{a.method}({args}) -> {render_value(a.ret)}"
    if isinstance(a, AsyncCallAtom):
        args = ", ".join(render_value(v) for v in a.header)
        return f"nu {a.fut}:{a.method}({args}) -> {render_value(a.ret)}"
    if isinstance(a, SyncAtom):
        return f"sync({a.fut})"
    if isinstance(a, ZeroAtom):
        return "0"
    raise AssertionError(a)


def render_btype(b: BType) -> str:
    if isinstance(b, Leaf):
        return render_atom(b.atom)
    if isinstance(b, SeqB):
        return f"{render_atom(b.atom)} ; {render_btype(b.rest)}"
    if isinstance(b, ChoiceB):
        return f"{render_btype(b.left)}\n+ {render_btype(b.right)}"
    if isinstance(b, GuardedB):
        body = render_btype(b.body).replace("\n", "\n  ")
        return f"({render_guard(b.guard)}) {{ {body} }}"
    raise AssertionError(b)


def render_method_btype(mb: MethodBType) -> str:
    head = ", ".join(render_value(v) for v in mb.header)
    body = "\n".join("  " + line for line in render_btype(mb.body).splitlines())
    return f"{mb.name}({head}) {{\n{body}\n}} : {render_value(mb.ret)}"


def render_program_btypes(pb: ProgramBTypes) -> str:
    parts = [render_method_btype(mb) for mb in pb.methods.values()]
    parts.append(render_method_btype(pb.main))
    return "\n\n".join(parts)
