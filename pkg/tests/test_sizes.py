"""Size-expression fragment tests.

The classification oracle is a tiny reference evaluator over the surface
syntax written here in the test: whatever classify_expr claims to be a size
expression must evaluate to the same rational (or the same truth value) under
every environment. Negation and complement checks then only need internal
consistency: g and negate(g) must disagree everywhere.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tml.ast import BinOp, Expr, Num, ThisCapacity, Var
from tml.errors import UnboundVariable
from tml.sizes import (
    CAPACITY_VAR,
    EQ,
    FALSE,
    LE,
    LT,
    NE,
    TRUE,
    And,
    Cmp,
    Lin,
    Or,
    classify_expr,
    conj_str,
    eval_guard,
    guard_free_vars,
    guard_subst,
    is_complement,
    lin_add,
    lin_const,
    lin_eval,
    lin_is_integral,
    lin_mul,
    lin_scale,
    lin_sub,
    lin_subst,
    lin_var,
    negate,
    render_guard,
    render_lin,
)


def num(v) -> Num:
    return Num(Fraction(v))


def ref_eval(e: Expr, env: dict) -> Fraction:
    """Reference evaluation of a pure integer expression."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, ThisCapacity):
        return env[CAPACITY_VAR]
    assert isinstance(e, BinOp)
    l, r = ref_eval(e.left, env), ref_eval(e.right, env)
    if e.op == "+":
        return l + r
    if e.op == "-":
        return l - r
    if e.op == "*":
        return l * r
    if e.op == "/":
        return l / r
    if e.op == "<=":
        return Fraction(1 if l <= r else 0)
    if e.op == "and":
        return Fraction(1 if l != 0 and r != 0 else 0)
    return Fraction(1 if l != 0 or r != 0 else 0)


# ---------------------------------------------------------------------------
# linear forms

def test_addition_merges_and_cancels_terms():
    a = lin_add(lin_var("n"), lin_const(1))
    b = lin_sub(lin_const(2), lin_var("n"))
    assert lin_add(a, b) == lin_const(3)


def test_product_needs_a_constant_side():
    assert lin_mul(lin_const(2), lin_var("x")) == lin_scale(lin_var("x"), Fraction(2))
    assert lin_mul(lin_var("x"), lin_var("y")) is None


def test_substitution_poisons_on_unknown():
    form = lin_add(lin_var("n"), lin_const(1))
    assert lin_subst(form, {"n": lin_var("m")}) == lin_add(lin_var("m"), lin_const(1))
    assert lin_subst(form, {"n": None}) is None
    # variables missing from the environment stay themselves
    assert lin_subst(form, {}) == form


def test_eval_unbound_variable():
    with pytest.raises(UnboundVariable):
        lin_eval(lin_var("n"), {})
    assert lin_eval(lin_var("n"), {}, default=Fraction(0)) == 0


def test_integrality():
    assert lin_is_integral(lin_sub(lin_var("n"), lin_const(1)))
    assert not lin_is_integral(lin_scale(lin_var("n"), Fraction(1, 2)))


# ---------------------------------------------------------------------------
# classification

def parse_like(src: str) -> Expr:
    from tml.parser import parse_program

    p = parse_program("{ Int q9; q9 = " + src + "; } with 1")
    return p.main.body.rhs.expr


def test_linear_shapes_classify():
    assert classify_expr(parse_like("n - 1")) == lin_sub(lin_var("n"), lin_const(1))
    assert classify_expr(parse_like("2 * x + y")) == lin_add(
        lin_scale(lin_var("x"), Fraction(2)), lin_var("y")
    )
    assert classify_expr(ThisCapacity()) == lin_var(CAPACITY_VAR)


def test_nonlinear_shapes_do_not_classify():
    assert classify_expr(parse_like("x * y")) is None
    assert classify_expr(parse_like("x / 2")) is None
    assert classify_expr(parse_like("this")) is None


def test_comparison_classifies_to_difference():
    g = classify_expr(parse_like("n <= 1"))
    assert g == Cmp(LE, lin_sub(lin_var("n"), lin_const(1)))


def test_connectives_classify():
    g = classify_expr(parse_like("1 <= n and n <= 5"))
    assert isinstance(g, And) and len(g.parts) == 2
    g = classify_expr(parse_like("n <= 0 or 5 <= n"))
    assert isinstance(g, Or) and len(g.parts) == 2


def test_connective_with_nonlinear_side_falls_out():
    assert classify_expr(parse_like("n <= 1 and x * y")) is None


# ---------------------------------------------------------------------------
# guard evaluation against the reference evaluator

fragment_vars = st.sampled_from(["a", "b"])


def _lin_exprs():
    leaf = st.one_of(
        st.integers(-9, 9).map(num),
        fragment_vars.map(Var),
    )

    def compound(children):
        return st.one_of(
            st.builds(lambda l, r: BinOp("+", l, r), children, children),
            st.builds(lambda l, r: BinOp("-", l, r), children, children),
            st.builds(lambda k, e: BinOp("*", num(k), e), st.integers(-3, 3), children),
        )

    return st.recursive(leaf, compound, max_leaves=5)


def _guard_exprs():
    cmp_exprs = st.builds(
        lambda l, r: BinOp("<=", l, r), _lin_exprs(), _lin_exprs()
    )

    def connect(children):
        return st.one_of(
            st.builds(lambda l, r: BinOp("and", l, r), children, children),
            st.builds(lambda l, r: BinOp("or", l, r), children, children),
        )

    return st.recursive(cmp_exprs, connect, max_leaves=4)


envs = st.fixed_dictionaries(
    {"a": st.integers(-10, 10).map(Fraction), "b": st.integers(-10, 10).map(Fraction)}
)


@settings(max_examples=200, derandomize=True, deadline=None)
@given(_lin_exprs(), envs)
def test_classified_arithmetic_matches_reference(e, env):
    lin = classify_expr(e)
    assert isinstance(lin, Lin)
    assert lin_eval(lin, env) == ref_eval(e, env)


@settings(max_examples=200, derandomize=True, deadline=None)
@given(_guard_exprs(), envs)
def test_classified_guards_match_reference(e, env):
    g = classify_expr(e)
    assert g is not None
    assert eval_guard(g, env) == (ref_eval(e, env) != 0)


@settings(max_examples=200, derandomize=True, deadline=None)
@given(_guard_exprs(), envs)
def test_negation_flips_truth(e, env):
    g = classify_expr(e)
    assert eval_guard(negate(g), env) == (not eval_guard(g, env))


@settings(max_examples=200, derandomize=True, deadline=None)
@given(_guard_exprs())
def test_double_negation_is_identity(e):
    g = classify_expr(e)
    assert negate(negate(g)) == g


@settings(max_examples=200, derandomize=True, deadline=None)
@given(_guard_exprs())
def test_negate_produces_complement(e):
    g = classify_expr(e)
    assert is_complement(g, negate(g))
    assert is_complement(negate(g), g)


def test_negation_of_fractional_form_is_strict():
    g = Cmp(LE, lin_scale(lin_var("n"), Fraction(1, 2)))
    ng = negate(g)
    assert ng == Cmp(LT, lin_scale(lin_var("n"), Fraction(-1, 2)))
    env0 = {"n": Fraction(0)}
    assert eval_guard(g, env0) and not eval_guard(ng, env0)
    assert negate(ng) == g


def test_equality_negation():
    g = Cmp(EQ, lin_var("n"))
    assert negate(g) == Cmp(NE, lin_var("n"))
    assert negate(negate(g)) == g
    assert is_complement(g, negate(g))


# ---------------------------------------------------------------------------
# guard utilities

def test_guard_substitution():
    g = Cmp(LE, lin_sub(lin_var("n"), lin_const(1)))
    assert guard_subst(g, {"n": lin_var("m")}) == Cmp(
        LE, lin_sub(lin_var("m"), lin_const(1))
    )
    assert guard_subst(g, {"n": None}) is None


def test_guard_free_vars_first_occurrence_order():
    g = And(
        (
            Cmp(LE, lin_add(lin_var("n"), lin_var("a"))),
            Cmp(LE, lin_add(lin_var("z"), lin_var("a"))),
        )
    )
    assert guard_free_vars(g) == ["a", "n", "z"]


def test_truth_constants():
    assert eval_guard(TRUE, {})
    assert not eval_guard(FALSE, {})
    assert negate(TRUE) == FALSE
    assert negate(FALSE) == TRUE


# ---------------------------------------------------------------------------
# rendering

def test_render_linear_forms():
    assert render_lin(lin_sub(lin_var("n"), lin_const(1))) == "n - 1"
    assert render_lin(lin_sub(lin_const(2), lin_var("n"))) == "-n + 2"
    assert (
        render_lin(
            lin_add(
                lin_scale(lin_var("x"), Fraction(2)),
                lin_sub(lin_var("y"), lin_const(3)),
            )
        )
        == "2*x + y - 3"
    )
    assert render_lin(lin_const(0)) == "0"


def test_render_guards_prefer_variable_on_the_left():
    le = Cmp(LE, lin_sub(lin_var("n"), lin_const(1)))
    assert render_guard(le) == "n <= 1"
    assert render_guard(negate(le)) == "n >= 2"
    assert render_guard(Cmp(NE, lin_var("x"))) == "x != 0"


def test_conj_str():
    assert conj_str([]) == "true"
    g = Cmp(LE, lin_sub(lin_var("n"), lin_const(1)))
    assert conj_str([g, negate(g)]) == "n <= 1 and n >= 2"
