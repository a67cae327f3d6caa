"""Size expressions: the linear fragment the analysis reasons about.

The analyzable fragment is Presburger-flavoured: linear combinations of
variables with rational coefficients, comparisons of those, and and/or of
comparisons. classify_expr decides membership for a surface expression and
normalizes on the way in, so n - 1 and 2*x land in the fragment as linear
forms with signed coefficients while x*y, divisions and anything touching
object values fall out.

Lin is the workhorse: const + sum of coeff*var with nonzero coefficients and
the term list sorted by name, so structural equality coincides with
mathematical equality of linear forms. Guards are Cmp/And/Or over Lin where
Cmp(op, lin) reads "lin op 0". Negation stays inside the fragment: the
complement of lin <= 0 is lin >= 1 when lin is integer-valued (method
parameters are Ints), and a strict comparison otherwise.

this.capacity participates in the fragment through a reserved pseudo-variable
which the type derivation substitutes away; it can never collide with a
program identifier because identifiers cannot contain a dot.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from .ast import BinOp, Expr, Num, This, ThisCapacity, Var
from .errors import UnboundVariable

CAPACITY_VAR = "this.capacity"


# ---------------------------------------------------------------------------
# linear forms

@dataclass(frozen=True)
class Lin:
    const: Fraction
    terms: tuple[tuple[str, Fraction], ...]  # sorted by var, coeffs nonzero

    def __post_init__(self):
        assert all(c != 0 for _, c in self.terms)
        assert list(self.terms) == sorted(self.terms, key=lambda t: t[0])

    @property
    def is_const(self) -> bool:
        return not self.terms

    def free_vars(self) -> list[str]:
        return [v for v, _ in self.terms]

    def __str__(self) -> str:
        return render_lin(self)


def lin_const(v) -> Lin:
    return Lin(Fraction(v), ())


def lin_var(name: str) -> Lin:
    return Lin(Fraction(0), ((name, Fraction(1)),))


ZERO_LIN = lin_const(0)
ONE_LIN = lin_const(1)


def lin_add(a: Lin, b: Lin) -> Lin:
    coeffs: dict[str, Fraction] = dict(a.terms)
    for v, c in b.terms:
        nc = coeffs.get(v, Fraction(0)) + c
        if nc == 0:
            coeffs.pop(v, None)
        else:
            coeffs[v] = nc
    return Lin(a.const + b.const, tuple(sorted(coeffs.items())))


def lin_neg(a: Lin) -> Lin:
    return Lin(-a.const, tuple((v, -c) for v, c in a.terms))


def lin_sub(a: Lin, b: Lin) -> Lin:
    return lin_add(a, lin_neg(b))


def lin_scale(a: Lin, k: Fraction) -> Lin:
    if k == 0:
        return ZERO_LIN
    return Lin(a.const * k, tuple((v, c * k) for v, c in a.terms))


def lin_mul(a: Lin, b: Lin) -> Optional[Lin]:
    """Product, defined only when one side is constant."""
    if a.is_const:
        return lin_scale(b, a.const)
    if b.is_const:
        return lin_scale(a, b.const)
    return None


def lin_subst(a: Lin, env: Mapping[str, Optional[Lin]]) -> Optional[Lin]:
    """Substitute variables; a None image poisons the whole form (unknown)."""
    out = lin_const(a.const)
    for v, c in a.terms:
        img = env.get(v, lin_var(v))
        if img is None:
            return None
        out = lin_add(out, lin_scale(img, c))
    return out


def lin_eval(a: Lin, env: Mapping[str, Fraction], default: Fraction | None = None) -> Fraction:
    total = a.const
    for v, c in a.terms:
        if v in env:
            total += c * env[v]
        elif default is not None:
            total += c * default
        else:
            raise UnboundVariable(v)
    return total


def lin_is_integral(a: Lin) -> bool:
    return a.const.denominator == 1 and all(c.denominator == 1 for _, c in a.terms)


# ---------------------------------------------------------------------------
# guards

LE, LT, EQ, NE = "<=", "<", "==", "!="


@dataclass(frozen=True)
class Cmp:
    op: str  # one of LE LT EQ NE, read as: lin op 0
    lin: Lin


@dataclass(frozen=True)
class And:
    parts: tuple["SizeExpr", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["SizeExpr", ...]


SizeExpr = Union[Lin, Cmp, And, Or]

TRUE = And(())
FALSE = Or(())


# ---------------------------------------------------------------------------
# classification

def _as_lin(e: Expr) -> Optional[Lin]:
    if isinstance(e, Num):
        return lin_const(e.value)
    if isinstance(e, Var):
        return lin_var(e.name)
    if isinstance(e, ThisCapacity):
        return lin_var(CAPACITY_VAR)
    if isinstance(e, This):
        return None
    if isinstance(e, BinOp):
        if e.op in ("+", "-", "*"):
            left = _as_lin(e.left)
            right = _as_lin(e.right)
            if left is None or right is None:
                return None
            if e.op == "+":
                return lin_add(left, right)
            if e.op == "-":
                return lin_sub(left, right)
            return lin_mul(left, right)
        # division is always outside the fragment, even by a constant
        return None
    return None


def classify_expr(e: Expr) -> Optional[SizeExpr]:
    """The size expression denoted by e, or None when e is not one."""
    lin = _as_lin(e)
    if lin is not None:
        return lin
    if isinstance(e, BinOp):
        if e.op == "<=":
            left = _as_lin(e.left)
            right = _as_lin(e.right)
            if left is not None and right is not None:
                return Cmp(LE, lin_sub(left, right))
            return None
        if e.op in ("and", "or"):
            left = classify_expr(e.left)
            right = classify_expr(e.right)
            if left is None or right is None:
                return None
            return And((left, right)) if e.op == "and" else Or((left, right))
    return None


def is_size_expr(e: Expr) -> bool:
    return classify_expr(e) is not None


# ---------------------------------------------------------------------------
# guard algebra

def as_guard(se: SizeExpr) -> SizeExpr:
    """Coerce a size expression into guard position.

    Bare arithmetic is truthy (nonzero), matching the 1/0 reading of
    booleans; comparisons and connectives pass through.
    """
    if isinstance(se, Lin):
        if se.is_const:
            return TRUE if se.const != 0 else FALSE
        return Cmp(NE, se)
    return se


def negate(g: SizeExpr) -> SizeExpr:
    g = as_guard(g)
    if isinstance(g, Cmp):
        if g.op == LE:
            # not(lin <= 0)  is  lin > 0; over integer-valued forms that is
            # lin >= 1, i.e. 1 - lin <= 0
            if lin_is_integral(g.lin):
                return Cmp(LE, lin_sub(ONE_LIN, g.lin))
            return Cmp(LT, lin_neg(g.lin))
        if g.op == LT:
            return Cmp(LE, lin_neg(g.lin))
        if g.op == EQ:
            return Cmp(NE, g.lin)
        return Cmp(EQ, g.lin)
    if isinstance(g, And):
        return Or(tuple(negate(p) for p in g.parts))
    if isinstance(g, Or):
        return And(tuple(negate(p) for p in g.parts))
    raise TypeError(f"not a guard: {g!r}")


def eval_guard(g: SizeExpr, env: Mapping[str, Fraction], default: Fraction | None = None) -> bool:
    if isinstance(g, Lin):
        return lin_eval(g, env, default) != 0
    if isinstance(g, Cmp):
        v = lin_eval(g.lin, env, default)
        if g.op == LE:
            return v <= 0
        if g.op == LT:
            return v < 0
        if g.op == EQ:
            return v == 0
        return v != 0
    if isinstance(g, And):
        return all(eval_guard(p, env, default) for p in g.parts)
    if isinstance(g, Or):
        return any(eval_guard(p, env, default) for p in g.parts)
    raise TypeError(f"not a guard: {g!r}")


def guard_subst(g: SizeExpr, env: Mapping[str, Optional[Lin]]) -> Optional[SizeExpr]:
    if isinstance(g, Lin):
        return lin_subst(g, env)
    if isinstance(g, Cmp):
        lin = lin_subst(g.lin, env)
        return None if lin is None else Cmp(g.op, lin)
    parts = []
    for p in g.parts:
        sp = guard_subst(p, env)
        if sp is None:
            return None
        parts.append(sp)
    return And(tuple(parts)) if isinstance(g, And) else Or(tuple(parts))


def guard_free_vars(g: SizeExpr) -> list[str]:
    if isinstance(g, Lin):
        return g.free_vars()
    if isinstance(g, Cmp):
        return g.lin.free_vars()
    out: list[str] = []
    for p in g.parts:
        for v in guard_free_vars(p):
            if v not in out:
                out.append(v)
    return out


def is_complement(a: SizeExpr, b: SizeExpr) -> bool:
    """Structural check that b is the complement of a.

    Used by the guard-coverage invariant: an if on a size expression splits
    into guards g and negate(g), whose disjunction must be valid.
    """
    a = as_guard(a)
    b = as_guard(b)
    if isinstance(a, Cmp) and isinstance(b, Cmp):
        if a.op == LE and b.op == LE:
            return b.lin == lin_sub(ONE_LIN, a.lin) or a.lin == lin_sub(ONE_LIN, b.lin)
        if {a.op, b.op} == {LE, LT}:
            le, lt = (a, b) if a.op == LE else (b, a)
            return lt.lin == lin_neg(le.lin)
        if {a.op, b.op} == {EQ, NE}:
            return a.lin == b.lin
        return False
    if isinstance(a, And) and isinstance(b, Or) or isinstance(a, Or) and isinstance(b, And):
        return len(a.parts) == len(b.parts) and all(
            is_complement(x, y) for x, y in zip(a.parts, b.parts)
        )
    return False


# ---------------------------------------------------------------------------
# rendering

def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def render_lin(lin: Lin) -> str:
    parts: list[str] = []
    for v, c in lin.terms:
        mag = abs(c)
        term = v if mag == 1 else f"{_fmt_coeff(mag)}*{v}"
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if c > 0 else f"- {term}")
    if lin.const != 0 or not parts:
        mag = abs(lin.const)
        if not parts:
            parts.append(_fmt_coeff(lin.const))
        else:
            parts.append(f"+ {_fmt_coeff(mag)}" if lin.const > 0 else f"- {_fmt_coeff(mag)}")
    return " ".join(parts)


def _split_sides(lin: Lin) -> tuple[Lin, Lin]:
    """Split lin into (pos, neg) with lin = pos - neg and both sides plus-only."""
    pos_terms = tuple((v, c) for v, c in lin.terms if c > 0)
    neg_terms = tuple((v, -c) for v, c in lin.terms if c < 0)
    pos_const = lin.const if lin.const > 0 else Fraction(0)
    neg_const = -lin.const if lin.const < 0 else Fraction(0)
    return Lin(pos_const, pos_terms), Lin(neg_const, neg_terms)


_FLIP = {LE: ">=", LT: ">"}


def render_guard(g: SizeExpr, parent: str = "") -> str:
    if isinstance(g, Lin):
        return render_lin(g)
    if isinstance(g, Cmp):
        pos, neg = _split_sides(g.lin)
        if g.op in (LE, LT) and pos.is_const and not neg.is_const:
            # prefer "n >= 2" over "2 <= n"
            return f"{render_lin(neg)} {_FLIP[g.op]} {render_lin(pos)}"
        rhs = render_lin(neg)
        return f"{render_lin(pos)} {g.op} {rhs}"
    if isinstance(g, And):
        if not g.parts:
            return "true"
        s = " and ".join(_paren_part(p) for p in g.parts)
        return s
    if isinstance(g, Or):
        if not g.parts:
            return "false"
        return " or ".join(_paren_part(p) for p in g.parts)
    raise TypeError(f"not a guard: {g!r}")


def _paren_part(p: SizeExpr) -> str:
    s = render_guard(p)
    if isinstance(p, (And, Or)) and p.parts:
        return f"({s})"
    return s


def conj_str(guards: Iterable[SizeExpr]) -> str:
    parts = [render_guard(g) for g in guards]
    return " and ".join(parts) if parts else "true"
