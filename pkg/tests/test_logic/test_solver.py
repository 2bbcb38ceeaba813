from concurrent.futures import ThreadPoolExecutor

import pytest

from dab.errors import SolverUnavailable
from dab.logic.backends import EXTERNAL, INTERNAL, SolverBackend, cross_check
from dab.logic.smtlib import IN_PROCESS, check_external, emit_smtlib
from dab.logic.solver import Obligation, check_obligation, is_sat_internal
from dab.logic.terms import (
    App, Const, Cube, FunctionSymbol, Signature, SortInfo, StateVar, Var, eq, mem, neq, undef,
)

SIG = Signature(
    [SortInfo("U", "id"), SortInfo("V", "value"), SortInfo("L", "value", ("a", "b"))],
    [FunctionSymbol("f", "U", "V")],
)

s1 = StateVar("s1", "U")
s2 = StateVar("s2", "U")
v = StateVar("v", "V")
c = StateVar("c", "L")
x = Var("x", "U")
A = Const("a", "L")
B = Const("b", "L")

CASES = [
    ("plain", [eq(s1, s2)], True),
    ("contradiction", [eq(s1, s2), neq(s1, s2)], False),
    ("congruence", [eq(s1, s2), neq(App("f", s1, "V"), App("f", s2, "V"))], False),
    ("null-axiom", [neq(x, undef("U")), eq(App("f", x, "V"), undef("V"))], False),
    ("undef-argument", [eq(x, undef("U")), neq(App("f", x, "V"), undef("V"))], False),
    ("closed-carrier", [neq(c, A), neq(c, B), neq(c, undef("L"))], False),
    ("closed-member", [neq(c, A), neq(c, undef("L"))], True),
    ("distinct-constants", [eq(c, A), eq(c, B)], False),
    ("open-sort", [neq(v, undef("V")), neq(v, App("f", s1, "V"))], True),
]
IDS = [name for name, _, _ in CASES]


class TestInternalProcedure:

    @staticmethod
    @pytest.mark.parametrize("name, literals, expected", CASES, ids=IDS)
    def test_sat(name, literals, expected):
        assert is_sat_internal(literals, SIG) == expected

    @staticmethod
    def test_clauses():
        ob = Obligation((neq(c, undef("L")),), ((eq(c, A), eq(c, B)), (neq(c, A),)))
        assert check_obligation(ob, SIG)
        ob = Obligation((neq(c, undef("L")),), ((eq(c, A),), (neq(c, A),)))
        assert not check_obligation(ob, SIG)

    @staticmethod
    def test_entailment():
        backend = SolverBackend(SIG)
        cube = Cube.of([eq(c, A)])
        assert backend.entails_cube(cube, [Cube.of([mem(c, {"a", "b"})])])
        assert not backend.entails_cube(cube, [Cube.of([eq(c, B)])])
        assert backend.entails([Cube.of([eq(c, A), eq(s1, s2)])], [Cube.of([eq(s1, s2)])])

    @staticmethod
    def test_counts_calls():
        backend = SolverBackend(SIG)
        backend.is_sat(Cube.of([eq(s1, s2)]))
        backend.is_sat([neq(s1, s2)])
        assert backend.calls == 2

    @staticmethod
    def test_unknown_backend():
        with pytest.raises(ValueError):
            SolverBackend(SIG, kind="oracle")


class TestSmtlib:

    @staticmethod
    def test_script_shape():
        doc = emit_smtlib(Obligation((eq(c, A),)), SIG)
        assert doc.startswith("(set-logic ALL)")
        assert doc.rstrip().endswith("(check-sat)")
        assert "(declare-fun f (U) V)" in doc
        assert doc == emit_smtlib(Obligation((eq(c, A),)), SIG)

    @staticmethod
    @pytest.mark.parametrize("name, literals, expected", CASES, ids=IDS)
    def test_in_process_agrees(name, literals, expected):
        pytest.importorskip("z3")
        backend = SolverBackend(SIG, kind=EXTERNAL, command=IN_PROCESS)
        assert backend.is_sat(literals) == expected

    @staticmethod
    def test_check_external_in_process():
        pytest.importorskip("z3")
        assert check_external(emit_smtlib(Obligation((eq(c, A),)), SIG), IN_PROCESS)
        assert not check_external(emit_smtlib(Obligation((eq(c, A), eq(c, B))), SIG), IN_PROCESS)

    @staticmethod
    def test_missing_binary():
        backend = SolverBackend(SIG, kind=EXTERNAL, command="no-such-solver-binary -in")
        with pytest.raises(SolverUnavailable):
            backend.is_sat([eq(s1, s2)])


POOL = [
    eq(s1, s2), neq(s1, s2), eq(App("f", s1, "V"), v), neq(App("f", s2, "V"), v), eq(v, undef("V")),
    neq(v, undef("V")), eq(s1, undef("U")), neq(s2, undef("U")), eq(c, A), neq(c, B), neq(c, undef("L")),
    eq(x, s1), neq(App("f", x, "V"), undef("V")),
]


@pytest.mark.slow
class TestRandomAgreement:

    @staticmethod
    def test_internal_matches_in_process(rng):
        pytest.importorskip("z3")
        backend = SolverBackend(SIG, kind=EXTERNAL, command=IN_PROCESS)
        for _ in range(40):
            literals = rng.sample(POOL, rng.randint(2, 5))
            assert backend.is_sat(literals) == is_sat_internal(literals, SIG), [str(lit) for lit in literals]


class TestCrossCheck:

    @staticmethod
    def test_reports_disagreements():
        backend = SolverBackend(SIG, record=True)
        assert backend.is_sat([eq(s1, s2)])
        assert not backend.is_sat([eq(c, A), eq(c, B)])
        assert backend.cross_check(INTERNAL) == []
        flipped = [(ob, not verdict) for ob, verdict in backend.log]
        assert cross_check(flipped, SIG, INTERNAL) == [ob for ob, _ in backend.log]

    @staticmethod
    def test_threads_get_separate_contexts():
        pytest.importorskip("z3")
        docs = [emit_smtlib(Obligation(tuple(lits)), SIG) for _, lits, _ in CASES]
        with ThreadPoolExecutor(max_workers=4) as pool:
            verdicts = list(pool.map(lambda doc: check_external(doc, IN_PROCESS), docs * 4))
        assert verdicts == [expected for _, _, expected in CASES] * 4
