"""Typing pass tests.

The fib summary is pinned as an exact rendered string, derived by walking
the rules by hand over the source below: the branch guard splits on
n <= 1, the else branch pays one job at the carrier's capacity, creates
one cog, invokes twice and synchronizes twice. Everything else checks one
rule in isolation, or a property of the guards that must hold for the
later cost stage to be sound.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tml.btypes import (
    UNKNOWN,
    AsyncCallAtom,
    ChoiceB,
    CogVal,
    CostAtom,
    FutVal,
    GuardedB,
    Leaf,
    Namer,
    NewCogAtom,
    SeqB,
    Signature,
    Size,
    SyncAtom,
    SyncCallAtom,
    ZeroAtom,
    bootstrap_signatures,
    instantiate_signature,
    main_param_names,
    render_method_btype,
    render_program_btypes,
    type_program,
)
from tml.errors import (
    ArityMismatch,
    GetOnNonFuture,
    MethodTypingErrors,
    RestrictionViolation,
    TypingError,
)
from tml.parser import parse_program
from tml.sizes import eval_guard, lin_add, lin_const, lin_var

FIB = """
Int fib(Int n) {
  Fut<Int> f;
  Class z;
  Int m1;
  Int m2;
  Fut<Int> g;
  if (n <= 1) {
    return 1;
  } else {
    job(1);
    z = new Class with this.capacity;
    f = this!fib(n - 1);
    g = z!fib(n - 2);
    m1 = f.get;
    m2 = g.get;
    return m1 + m2;
  }
}

{
  Class z;
  Int n;
  Fut<Int> f;
  Int m;
  z = new Class with 1;
  f = z!fib(n);
  m = f.get;
} with 1
"""

WRAPPER_FOREIGN = """
Int server() {
  job(2);
  return 1;
}

Int wrapper(Class x) {
  Fut<Int> f;
  Int z;
  job(1);
  f = x!server();
  z = f.get;
  return z;
}

{ } with 1
"""

WRAPPER_SAMECOG = """
Int server() {
  job(2);
  return 1;
}

Int wrapper() {
  Class w;
  Fut<Int> f;
  Int r;
  w = new local Class;
  job(1);
  f = w!server();
  r = f.get;
  return r;
}

{ Fut<Int> h; Int r; h = this!wrapper(); r = h.get; } with 1
"""


def typed(src: str):
    return type_program(parse_program(src))


def atoms(b) -> list:
    if isinstance(b, Leaf):
        return [b.atom]
    if isinstance(b, SeqB):
        return [b.atom] + atoms(b.rest)
    if isinstance(b, ChoiceB):
        return atoms(b.left) + atoms(b.right)
    if isinstance(b, GuardedB):
        return atoms(b.body)
    raise AssertionError(b)


# ---------------------------------------------------------------------------
# the fib summary

class TestFibSummary:
    def test_rendered_summary(self):
        pb = typed(FIB)
        assert render_method_btype(pb.methods["fib"]) == (
            "fib(c[x], n) {\n"
            "  (n <= 1) { 0 }\n"
            "  + (n >= 2) { 1/x ; new d[x] ; nu f:fib(c[x], n - 1) -> -- ;"
            " nu g:fib(d[x], n - 2) -> -- ; sync(f) ; sync(g) ; 0 }\n"
            "} : --"
        )

    def test_rendered_driver(self):
        pb = typed(FIB)
        assert render_method_btype(pb.main) == (
            "main(start[1], n) {\n"
            "  new d[1] ; nu f:fib(d[1], n) -> -- ; sync(f)\n"
            "} : --"
        )

    def test_branch_guards_split_on_the_condition(self):
        pb = typed(FIB)
        body = pb.methods["fib"].body
        assert isinstance(body, ChoiceB)
        assert isinstance(body.left, GuardedB)
        assert isinstance(body.right, GuardedB)

    @settings(derandomize=True, deadline=None, max_examples=100)
    @given(n=st.integers(-20, 20))
    def test_branch_guards_partition(self, n):
        pb = typed(FIB)
        body = pb.methods["fib"].body
        env = {"n": Fraction(n)}
        taken = [
            g for g in (body.left.guard, body.right.guard) if eval_guard(g, env)
        ]
        assert len(taken) == 1

    def test_recursion_atoms(self):
        pb = typed(FIB)
        got = atoms(pb.methods["fib"].body)
        kinds = [type(a).__name__ for a in got]
        assert kinds == [
            "ZeroAtom", "CostAtom", "NewCogAtom", "AsyncCallAtom",
            "AsyncCallAtom", "SyncAtom", "SyncAtom", "ZeroAtom",
        ]
        cost = got[1]
        assert cost.num == lin_const(Fraction(1))
        assert cost.den == lin_var("x")
        calls = [a for a in got if isinstance(a, AsyncCallAtom)]
        assert [a.header[0].cog for a in calls] == ["c", "d"]
        assert {a.fut for a in calls} == {"f", "g"}

    def test_envs_are_erased(self):
        pb = typed(FIB)
        leaves = []

        def walk(b):
            if isinstance(b, Leaf):
                leaves.append(b)
            elif isinstance(b, SeqB):
                walk(b.rest)
            elif isinstance(b, ChoiceB):
                walk(b.left)
                walk(b.right)
            elif isinstance(b, GuardedB):
                walk(b.body)

        for mb in list(pb.methods.values()) + [pb.main]:
            walk(mb.body)
        assert leaves and all(l.env is None for l in leaves)


# ---------------------------------------------------------------------------
# cog restrictions

class TestRestrictions:
    def test_invoking_a_foreign_argument_is_rejected(self):
        with pytest.raises(MethodTypingErrors) as exc:
            typed(WRAPPER_FOREIGN)
        failures = exc.value.failures
        assert [name for name, _ in failures] == ["wrapper"]
        assert isinstance(failures[0][1], RestrictionViolation)

    def test_collects_every_failing_method(self):
        src = """
        Int a(Class x) { Fut<Int> f; f = x!a(x); return 0; }
        Int b(Class x) { Fut<Int> f; f = x!b(x); return 0; }

        { } with 1
        """
        with pytest.raises(MethodTypingErrors) as exc:
            typed(src)
        assert [name for name, _ in exc.value.failures] == ["a", "b"]

    def test_same_cog_variant_is_accepted(self):
        pb = typed(WRAPPER_SAMECOG)
        assert set(pb.methods) == {"server", "wrapper"}

    def test_invoking_a_locally_created_cog_is_accepted(self):
        pb = typed(FIB)
        assert "fib" in pb.methods

    def test_sync_call_across_cogs_is_rejected(self):
        src = """
        Int ping(Int t) { job(t); return 0; }

        { Class z; Int r; Int t; z = new Class with 1; t = 1; r = z.ping(t); } with 1
        """
        with pytest.raises(MethodTypingErrors) as exc:
            typed(src)
        assert isinstance(exc.value.failures[0][1], RestrictionViolation)

    def test_sync_call_on_own_cog_is_accepted(self):
        src = """
        Int ping(Int t) { job(t); return 0; }

        { Int r; Int t; t = 1; r = this.ping(t); } with 1
        """
        pb = typed(src)
        assert isinstance(atoms(pb.main.body)[1], SyncCallAtom)


# ---------------------------------------------------------------------------
# individual rules

class TestRules:
    def test_new_local_stays_in_the_carrier_cog(self):
        pb = typed(WRAPPER_SAMECOG)
        wrapper = pb.methods["wrapper"]
        first = atoms(wrapper.body)[0]
        assert isinstance(first, ZeroAtom)
        call = [a for a in atoms(wrapper.body) if isinstance(a, AsyncCallAtom)][0]
        assert call.header[0].cog == wrapper.this_val.cog

    def test_new_with_tracks_the_capacity_expression(self):
        src = "{ Class z; Int n; z = new Class with n + 1; } with 1"
        pb = typed(src)
        atom = atoms(pb.main.body)[0]
        assert isinstance(atom, NewCogAtom)
        assert atom.cap == lin_add(lin_var("n"), lin_const(Fraction(1)))

    def test_new_with_requires_a_size_capacity(self):
        src = "{ Class z; Class w; w = new local Class; z = new Class with w; } with 1"
        with pytest.raises(MethodTypingErrors):
            typed(src)

    def test_job_requires_a_size_amount(self):
        src = "{ Class w; w = new local Class; job(w); } with 1"
        with pytest.raises(MethodTypingErrors):
            typed(src)

    def test_second_get_on_a_future_is_free(self):
        src = """
        Int one() { job(1); return 1; }

        { Fut<Int> f; Int a; Int b; f = this!one(); a = f.get; b = f.get; } with 1
        """
        pb = typed(src)
        got = atoms(pb.main.body)
        kinds = [type(a).__name__ for a in got]
        assert kinds == ["AsyncCallAtom", "SyncAtom", "ZeroAtom"]

    def test_get_on_a_non_future_is_rejected(self):
        src = "{ Int n; Int m; m = n.get; } with 1"
        with pytest.raises(MethodTypingErrors) as exc:
            typed(src)
        assert isinstance(exc.value.failures[0][1], GetOnNonFuture)

    def test_futures_are_linear(self):
        src = """
        Int one() { job(1); return 1; }

        { Fut<Int> f; Int a; f = this!one(); f = this!one(); a = f.get; } with 1
        """
        pb = typed(src)
        calls = [a for a in atoms(pb.main.body) if isinstance(a, AsyncCallAtom)]
        assert len({a.fut for a in calls}) == 2
        sync = [a for a in atoms(pb.main.body) if isinstance(a, SyncAtom)][0]
        assert sync.fut == calls[1].fut

    def test_branch_assignments_do_not_leak(self):
        # x differs across branches, so the trailing job must be typed
        # twice, once per branch environment
        src = """
        {
          Int n;
          Int x;
          if (n <= 0) { x = 1; } else { x = 2; }
          job(x);
        } with 1
        """
        pb = typed(src)
        body = pb.main.body
        costs = [a for a in atoms(body) if isinstance(a, CostAtom)]
        assert [c.num for c in costs] == [lin_const(Fraction(1)), lin_const(Fraction(2))]

    def test_opaque_condition_yields_an_unguarded_choice(self):
        # coin's returns diverge, so its value is opaque and the branch
        # condition cannot become a guard
        src = """
        Int coin(Int n) {
          if (n <= 0) { return 0; } else { return 1; }
        }

        {
          Int n;
          Int c;
          Int x;
          Fut<Int> f;
          f = this!coin(n);
          c = f.get;
          if (c) { x = 1; } else { x = 2; }
        } with 1
        """
        pb = typed(src)
        choice = [
            b for b in _subtrees(pb.main.body) if isinstance(b, ChoiceB)
        ][0]
        assert not isinstance(choice.left, GuardedB)
        assert not isinstance(choice.right, GuardedB)


def _subtrees(b):
    yield b
    if isinstance(b, SeqB):
        yield from _subtrees(b.rest)
    elif isinstance(b, ChoiceB):
        yield from _subtrees(b.left)
        yield from _subtrees(b.right)
    elif isinstance(b, GuardedB):
        yield from _subtrees(b.body)


# ---------------------------------------------------------------------------
# signatures

class TestSignatures:
    def test_return_size_inferred_from_constant_returns(self):
        pb = typed(WRAPPER_SAMECOG)
        assert pb.methods["server"].ret == Size(lin_const(Fraction(1)))

    def test_return_size_inferred_from_parameter(self):
        src = """
        Int echo(Int n) { job(1); return n; }

        { Int n; Int r; Fut<Int> f; f = this!echo(n); r = f.get; } with 1
        """
        pb = typed(src)
        assert pb.methods["echo"].ret == Size(lin_var("n"))

    def test_reassigned_parameter_is_not_a_size_return(self):
        src = """
        Int bump(Int n) { n = n + 1; return n; }

        { Int n; Int r; r = this.bump(n); } with 1
        """
        pb = typed(src)
        assert pb.methods["bump"].ret is UNKNOWN

    def test_divergent_returns_are_opaque(self):
        pb = typed(FIB)
        assert pb.methods["fib"].ret is UNKNOWN

    def test_missing_return_is_opaque(self):
        src = """
        Int one() { job(1); }

        { Fut<Int> f; f = this!one(); } with 1
        """
        pb = typed(src)
        assert pb.methods["one"].ret is UNKNOWN

    def test_wrong_arity_is_rejected(self):
        src = """
        Int echo(Int n) { return n; }

        { Fut<Int> f; f = this!echo(); } with 1
        """
        with pytest.raises(MethodTypingErrors) as exc:
            typed(src)
        assert isinstance(exc.value.failures[0][1], ArityMismatch)

    def test_instantiation_substitutes_sizes(self):
        sig = Signature(
            CogVal("c", lin_var("x")), (Size(lin_var("n")),), Size(lin_var("n"))
        )
        callee = CogVal("start", lin_const(Fraction(2)))
        header, ret = instantiate_signature(
            sig, callee, [Size(lin_const(Fraction(7)))], Namer()
        )
        assert header == (callee, Size(lin_const(Fraction(7))))
        assert ret == Size(lin_const(Fraction(7)))

    def test_instantiation_with_opaque_argument_poisons_the_return(self):
        sig = Signature(
            CogVal("c", lin_var("x")), (Size(lin_var("n")),), Size(lin_var("n"))
        )
        callee = CogVal("start", lin_const(Fraction(2)))
        header, ret = instantiate_signature(sig, callee, [UNKNOWN], Namer())
        assert header == (callee, UNKNOWN)
        assert ret is UNKNOWN

    def test_main_inputs_are_the_unassigned_int_locals(self):
        p = parse_program(FIB)
        assert main_param_names(p.main) == ["n"]

    def test_main_capacity_is_the_declared_one(self):
        pb = typed("{ job(3); } with 4")
        assert pb.main.this_val == CogVal("start", lin_const(Fraction(4)))
        cost = atoms(pb.main.body)[0]
        assert cost.den == lin_const(Fraction(4))

    def test_empty_main_types_to_nothing(self):
        pb = typed("{ } with 1")
        assert atoms(pb.main.body) == [ZeroAtom()]
        assert pb.main.params == ()

    def test_bootstrap_avoids_name_collisions(self):
        src = """
        Int m(Int x, Int c) { job(x); return 0; }

        { } with 1
        """
        sigs = bootstrap_signatures(parse_program(src))
        sig = sigs["m"]
        assert sig.this_val.cog not in {"x", "c"}
        assert str(sig.this_val.cap) not in {"x", "c"}
