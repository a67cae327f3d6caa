"""Cost equation tests.

The fib equations are pinned as rendered strings, derived by hand from
the summary: the base branch costs nothing, the recursive branch pays one
job and the slower of the two arms, with the shared job factored out of
the max. The conservation property at the end checks the pending-call
bookkeeping against a five-line reference model: a branch's pending set
must be exactly the futures invoked but not yet grouped away by a wait.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tml import corpus
from tml.btypes import (
    UNKNOWN,
    AsyncCallAtom,
    ChoiceB,
    CogVal,
    CostAtom,
    GuardedB,
    Leaf,
    SeqB,
    SyncAtom,
    SyncCallAtom,
    ZeroAtom,
    type_program,
)
from tml.costgen import (
    CApp,
    CLin,
    CMax,
    CRatio,
    CSum,
    CZERO,
    clin,
    cmax,
    cost_free_vars,
    cratio,
    csum,
    render_cost,
    render_cost_system,
    render_equation,
    translate_btype,
    translate_program,
)
from tml.errors import DivisionByZero, UndefinedSymbol
from tml.sizes import LE, Cmp, lin_const, lin_sub, lin_var


def lv(name):
    return lin_var(name)


def lc(v):
    return lin_const(Fraction(v))


def system(name: str):
    return translate_program(type_program(corpus.load_program(name)))


# ---------------------------------------------------------------------------
# expression constructors

class TestConstructors:
    def test_sum_merges_linear_terms(self):
        got = csum(clin(1), cratio(lc(1), lv("x")), clin(2))
        assert got == CSum((CLin(lc(3)), CRatio(lc(1), lv("x"))))

    def test_sum_merges_ratios_with_equal_denominator(self):
        got = csum(cratio(lc(1), lv("x")), clin(1), cratio(lc(2), lv("x")))
        assert got == CSum((CRatio(lc(3), lv("x")), CLin(lc(1))))

    def test_sum_drops_zero_and_flattens(self):
        app = CApp("m", (lv("n"),))
        assert csum(CZERO, app) == app
        assert csum(csum(clin(1), app), clin(-1)) == app

    def test_empty_sum_is_zero(self):
        assert csum() == CZERO

    def test_ratio_folds_constant_denominators(self):
        assert cratio(lc(3), lc(2)) == CLin(lc(Fraction(3, 2)))
        assert cratio(lc(0), lv("x")) == CZERO

    def test_ratio_rejects_zero_capacity(self):
        with pytest.raises(DivisionByZero):
            cratio(lc(1), lc(0))

    def test_max_collapses_duplicates(self):
        app = CApp("m", (lv("n"),))
        assert cmax(app, app) == app

    def test_max_factors_common_addends(self):
        a, b, c = (CApp(n, ()) for n in ("a", "b", "c"))
        got = cmax(csum(clin(1), a, b), csum(clin(1), a, c))
        assert got == csum(clin(1), a, cmax(b, c))

    def test_max_factoring_respects_multiplicity(self):
        a, b = CApp("a", ()), CApp("b", ())
        got = cmax(csum(a, a, b), csum(a, b))
        assert got == csum(a, b, cmax(a, CZERO))

    def test_max_flattens_nested_maxes(self):
        a, b, c = (CApp(n, ()) for n in ("a", "b", "c"))
        assert cmax(cmax(a, b), c) == CMax((a, b, c))

    def test_free_vars(self):
        e = csum(cratio(lc(1), lv("x")), cmax(CApp("m", (lv("n"),)), CLin(lv("k"))))
        assert cost_free_vars(e) == {"x", "n", "k"}

    def test_render(self):
        e = csum(cratio(lc(1), lv("x")), cmax(CApp("m", (lv("n"),)), CZERO))
        assert render_cost(e) == "1/x + max(m(n), 0)"
        assert render_cost(cratio(lin_sub(lv("n"), lc(1)), lv("x"))) == "(n - 1)/x"


# ---------------------------------------------------------------------------
# corpus equation systems

class TestFibEquations:
    def test_rendered_system(self):
        assert render_cost_system(system("fib_driver_cap1.tml")) == (
            "fib(x, n) = 0 [n <= 1]\n"
            "fib(x, n) = 1/x + max(fib(x, n - 1), fib(x, n - 2)) [n >= 2]\n"
            "main(n) = max(0, fib(1, n))"
        )

    def test_recursive_branch_structure(self):
        sys = system("fib.tml")
        eq = sys.equations_for("fib")[1]
        assert eq.formals == ("x", "n")
        assert eq.body == CSum((
            CRatio(lc(1), lv("x")),
            CMax((
                CApp("fib", (lv("x"), lin_sub(lv("n"), lc(1)))),
                CApp("fib", (lv("x"), lin_sub(lv("n"), lc(2)))),
            )),
        ))

    def test_guards(self):
        sys = system("fib.tml")
        base, rec = sys.equations_for("fib")
        assert base.guards == (Cmp(LE, lin_sub(lv("n"), lc(1))),)
        assert len(rec.guards) == 1
        assert render_equation(base).endswith("[n <= 1]")
        assert render_equation(rec).endswith("[n >= 2]")

    def test_symbol_metadata(self):
        sys = system("fib_driver_cap1.tml")
        assert sys.symbols["fib"].formals == ("x", "n")
        assert sys.symbols["fib"].cap_formal == "x"
        assert sys.symbols["main"].formals == ("n",)
        assert sys.symbols["main"].cap_formal is None

    def test_unknown_symbol_is_rejected(self):
        with pytest.raises(UndefinedSymbol):
            system("fib.tml").equations_for("fibonacci")


class TestWrapperEquations:
    def test_wrapper_adds_the_server_cost_once(self):
        sys = system("wrapper_samecog.tml")
        (eq,) = sys.equations_for("wrapper")
        assert eq.body == CSum((CRatio(lc(1), lv("x")), CApp("server", (lv("x"),))))

    def test_unsynchronized_same_cog_call_still_counts(self):
        sys = system("wrapper_with_log.tml")
        (eq,) = sys.equations_for("wrapper_with_log")
        assert eq.body == CSum((
            CRatio(lc(1), lv("x")),
            CApp("server", (lv("x"),)),
            CApp("print_log", (lv("x"),)),
        ))

    def test_trailing_foreign_call_is_maxed_from_zero(self):
        sys = system("wrapper_with_external_log.tml")
        (eq,) = sys.equations_for("wrapper_with_external_log")
        assert isinstance(eq.body, CSum)
        tail = eq.body.parts[-1]
        assert isinstance(tail, CMax)
        assert tail.alts[0] == CZERO
        apps = [p for p in tail.alts[1].parts if isinstance(p, CApp)]
        assert apps[0].name == "external_log"

    def test_fire_and_forget_on_own_cog_is_a_plain_sum(self):
        sys = system("one.tml")
        (eq,) = sys.equations_for("main")
        assert eq.body == CApp("one", (lc(1),))


class TestOtherSystems:
    def test_self_recursion_translates_to_itself(self):
        sys = system("foo.tml")
        (eq,) = sys.equations_for("foo")
        assert eq.body == CApp("foo", (lv("x"),))

    def test_doubled_capacity_shows_in_the_recursive_call(self):
        sys = system("fib_alt.tml")
        rec = sys.equations_for("fib_alt")[1]
        far = rec.body.parts[1].alts[1]
        # capacity argument is 2x, size argument n-2
        assert far.name == "fib_alt"
        assert far.args[0].terms == (("x", Fraction(2)),)
        assert far.args[1] == lin_sub(lv("n"), lc(2))

    def test_empty_program(self):
        sys = system("empty.tml")
        (eq,) = sys.equations
        assert (eq.name, eq.formals, eq.body, eq.guards) == ("main", (), CZERO, ())

    def test_result_sizes_flow_through_futures(self):
        src = """
        Int id(Int v) { return v; }
        Int muddle(Int v) { if (v <= 0) { return 0; } else { return 1; } }
        Int poke(Int v) { job(v); return 0; }

        {
          Int n;
          Int a;
          Int b;
          Fut<Int> f;
          Fut<Int> g;
          Fut<Int> h;
          f = this!id(n);
          a = f.get;
          g = this!poke(a);
          b = g.get;
          f = this!muddle(n);
          a = f.get;
          h = this!poke(a);
          b = h.get;
        } with 1
        """
        from tml.parser import parse_program

        sys = translate_program(type_program(parse_program(src)))
        (eq,) = sys.equations_for("main")
        pokes = [a for a in _apps(eq.body) if a.name == "poke"]
        assert len(pokes) == 2
        # id's result keeps its size, muddle's is a fresh unconstrained name
        assert pokes[0].args[1] == lv("n")
        opaque = pokes[1].args[1]
        assert opaque.terms and opaque.terms[0][0].startswith("u")


def _apps(e):
    if isinstance(e, CApp):
        yield e
    elif isinstance(e, CSum):
        for p in e.parts:
            yield from _apps(p)
    elif isinstance(e, CMax):
        for p in e.alts:
            yield from _apps(p)


# ---------------------------------------------------------------------------
# pending-call conservation

def _paths(b):
    """Root-to-leaf atom sequences, in the order translate emits branches."""
    if isinstance(b, Leaf):
        return [[b.atom]]
    if isinstance(b, SeqB):
        return [[b.atom] + p for p in _paths(b.rest)]
    if isinstance(b, ChoiceB):
        return _paths(b.left) + _paths(b.right)
    if isinstance(b, GuardedB):
        return _paths(b.body)
    raise AssertionError(b)


def _expected_pending(path):
    """Reference model: asyncs add their future, a wait on a known future
    removes every pending call on the same cog."""
    pending = {}
    for atom in path:
        if isinstance(atom, AsyncCallAtom):
            pending[atom.fut] = atom.header[0].cog
        elif isinstance(atom, SyncAtom) and atom.fut in pending:
            cog = pending[atom.fut]
            pending = {f: c for f, c in pending.items() if c != cog}
    return set(pending)


_COGS = ("c", "d", "e")


@st.composite
def btypes(draw):
    counter = draw(st.integers(0, 0).map(lambda _: [0]))

    def atom():
        kind = draw(st.sampled_from(["cost", "async", "sync", "synccall", "zero"]))
        if kind == "cost":
            return CostAtom(lc(draw(st.integers(1, 4))), lv("x"))
        if kind == "async":
            counter[0] += 1
            cog = draw(st.sampled_from(_COGS))
            return AsyncCallAtom(
                f"f{counter[0]}", "m", (CogVal(cog, lv("x")),), UNKNOWN
            )
        if kind == "sync":
            return SyncAtom(f"f{draw(st.integers(1, max(counter[0], 1)))}")
        if kind == "synccall":
            return SyncCallAtom("m", (CogVal("c", lv("x")),), UNKNOWN)
        return ZeroAtom()

    def tree(depth):
        if depth == 0 or draw(st.booleans()):
            return Leaf(atom(), None)
        shape = draw(st.sampled_from(["seq", "choice", "guard"]))
        if shape == "seq":
            return SeqB(atom(), tree(depth - 1))
        if shape == "choice":
            return ChoiceB(tree(depth - 1), tree(depth - 1))
        return GuardedB(Cmp(LE, lin_sub(lv("n"), lc(1))), tree(depth - 1))

    return tree(4)


class TestConservation:
    @settings(derandomize=True, deadline=None, max_examples=200)
    @given(b=btypes())
    def test_pending_calls_track_the_reference_model(self, b):
        fresh = iter(f"u{i}" for i in range(1000)).__next__
        branches = translate_btype({}, (), CZERO, b, "c", fresh)
        paths = _paths(b)
        assert len(branches) == len(paths)
        for (psi, _, _), path in zip(branches, paths):
            assert set(psi) == _expected_pending(path)

    @settings(derandomize=True, deadline=None, max_examples=100)
    @given(b=btypes())
    def test_translation_is_deterministic(self, b):
        def once():
            c = [0]

            def fresh():
                c[0] += 1
                return f"u{c[0]}"

            return translate_btype({}, (), CZERO, b, "c", fresh)

        assert once() == once()
