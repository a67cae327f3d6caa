"""Abstract syntax for tml programs.

A program is a list of method definitions followed by a main body annotated
with the capacity of the start cog. Parameters carry simple types (Int or
Class; there is a single class), locals may additionally be futures. The
parser keeps every statement list in right-associated Seq normal form, so
Seq(a, Seq(b, c)) is the canonical spelling of a;b;c.

Expressions are kept as surface trees. Whether an expression lies in the
linear (size) fragment is a derived judgement, see sizes.classify_expr; the
interpreter evaluates the raw tree. Booleans are the constants 1 and 0, the
parser maps the literals true/false accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class SimpleType:
    name: str  # "Int" | "Class"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class FutType:
    inner: SimpleType

    def __str__(self) -> str:
        return f"Fut<{self.inner}>"


Type = Union[SimpleType, FutType]

INT = SimpleType("Int")
CLASS = SimpleType("Class")


# ---------------------------------------------------------------------------
# expressions

class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class This(Expr):
    pass


@dataclass(frozen=True)
class ThisCapacity(Expr):
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - * / <= and or
    left: Expr
    right: Expr


def num(v) -> Num:
    return Num(Fraction(v))


# ---------------------------------------------------------------------------
# right-hand sides of assignments (the side-effect expressions)

class Rhs:
    __slots__ = ()


@dataclass(frozen=True)
class Pure(Rhs):
    expr: Expr


@dataclass(frozen=True)
class AsyncCall(Rhs):
    callee: Expr
    method: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class SyncCall(Rhs):
    callee: Expr
    method: str
    args: tuple[Expr, ...]  # well-formedness restricts these to variables


@dataclass(frozen=True)
class Get(Rhs):
    expr: Expr


@dataclass(frozen=True)
class NewWith(Rhs):
    capacity: Expr


@dataclass(frozen=True)
class NewLocal(Rhs):
    pass


# ---------------------------------------------------------------------------
# statements

class Stmt:
    __slots__ = ()


@dataclass(frozen=True)
class Assign(Stmt):
    target: str
    rhs: Rhs


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then_branch: Stmt
    else_branch: Stmt


@dataclass(frozen=True)
class Job(Stmt):
    amount: Expr


@dataclass(frozen=True)
class Return(Stmt):
    value: Expr


@dataclass(frozen=True)
class Seq(Stmt):
    head: Stmt
    tail: Stmt


def seq(stmts: list[Stmt]) -> Stmt | None:
    """Build the right-associated Seq chain for a statement list."""
    if not stmts:
        return None
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def stmt_list(s: Stmt | None) -> list[Stmt]:
    """Flatten a Seq chain back into a list."""
    out: list[Stmt] = []
    while isinstance(s, Seq):
        out.append(s.head)
        s = s.tail
    if s is not None:
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# declarations, methods, program

@dataclass(frozen=True)
class VarDecl:
    type: Type
    name: str


@dataclass(frozen=True)
class MethodDecl:
    ret_type: SimpleType
    name: str
    params: tuple[VarDecl, ...]
    locals_: tuple[VarDecl, ...]
    body: Stmt


@dataclass(frozen=True)
class Main:
    locals_: tuple[VarDecl, ...]
    body: Stmt | None  # main may be empty
    capacity: Fraction


@dataclass(frozen=True)
class Program:
    methods: tuple[MethodDecl, ...]
    main: Main


def method_table(p: Program) -> dict[str, MethodDecl]:
    return {m.name: m for m in p.methods}


# ---------------------------------------------------------------------------
# printing
#
# pretty(parse(src)) reparses to an equal tree; the printer therefore
# parenthesizes strictly by precedence and never folds constants.

_PREC = {"or": 1, "and": 2, "<=": 3, "+": 4, "-": 4, "*": 5, "/": 5}


def pretty_expr(e: Expr, parent_prec: int = 0, right: bool = False) -> str:
    if isinstance(e, This):
        return "this"
    if isinstance(e, ThisCapacity):
        return "this.capacity"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Num):
        v = e.value
        if v.denominator == 1:
            return str(v.numerator)
        # fractional literals only arise internally (tick residues); they are
        # printed as a division so the result still reads as tml syntax
        s = f"{v.numerator} / {v.denominator}"
        return f"({s})" if parent_prec else s
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        # comparison is non-associative: parenthesize an equal-precedence
        # child on either side, not just the right one
        left_is_right = e.op == "<="
        s = (
            f"{pretty_expr(e.left, prec, left_is_right)} {e.op} "
            f"{pretty_expr(e.right, prec, True)}"
        )
        if prec < parent_prec or (prec == parent_prec and right):
            return f"({s})"
        return s
    raise TypeError(f"not an expression: {e!r}")


def pretty_rhs(r: Rhs) -> str:
    if isinstance(r, Pure):
        return pretty_expr(r.expr)
    if isinstance(r, AsyncCall):
        args = ", ".join(pretty_expr(a) for a in r.args)
        return f"{pretty_expr(r.callee, _PREC['or'] + 1)}!{r.method}({args})"
    if isinstance(r, SyncCall):
        args = ", ".join(pretty_expr(a) for a in r.args)
        return f"{pretty_expr(r.callee, _PREC['or'] + 1)}.{r.method}({args})"
    if isinstance(r, Get):
        return f"{pretty_expr(r.expr, _PREC['or'] + 1)}.get"
    if isinstance(r, NewWith):
        return f"new Class with {pretty_expr(r.capacity)}"
    if isinstance(r, NewLocal):
        return "new local Class"
    raise TypeError(f"not a rhs: {r!r}")


def _pretty_stmts(s: Stmt | None, indent: str) -> list[str]:
    lines: list[str] = []
    for st in stmt_list(s):
        if isinstance(st, Assign):
            lines.append(f"{indent}{st.target} = {pretty_rhs(st.rhs)};")
        elif isinstance(st, Job):
            lines.append(f"{indent}job({pretty_expr(st.amount)});")
        elif isinstance(st, Return):
            lines.append(f"{indent}return {pretty_expr(st.value)};")
        elif isinstance(st, If):
            lines.append(f"{indent}if ({pretty_expr(st.cond)}) {{")
            lines.extend(_pretty_stmts(st.then_branch, indent + "    "))
            lines.append(f"{indent}}} else {{")
            lines.extend(_pretty_stmts(st.else_branch, indent + "    "))
            lines.append(f"{indent}}}")
        else:
            raise TypeError(f"not a statement: {st!r}")
    return lines


def _pretty_decls(decls: tuple[VarDecl, ...], indent: str) -> list[str]:
    return [f"{indent}{d.type} {d.name};" for d in decls]


def pretty_program(p: Program) -> str:
    lines: list[str] = []
    for m in p.methods:
        params = ", ".join(f"{d.type} {d.name}" for d in m.params)
        lines.append(f"{m.ret_type} {m.name}({params}) {{")
        lines.extend(_pretty_decls(m.locals_, "    "))
        lines.extend(_pretty_stmts(m.body, "    "))
        lines.append("}")
        lines.append("")
    lines.append("{")
    lines.extend(_pretty_decls(p.main.locals_, "    "))
    lines.extend(_pretty_stmts(p.main.body, "    "))
    cap = p.main.capacity
    cap_s = str(cap.numerator) if cap.denominator == 1 else f"{cap.numerator} / {cap.denominator}"
    lines.append(f"}} with {cap_s}")
    lines.append("")
    return "\n".join(lines)
