"""
Covers computed by quantifier elimination agree with existential truth in
extensions of every small structure.
"""
import itertools

import pytest

from dab.errors import CyclicSignature
from dab.logic.evaluate import FiniteStructure, eval_literal, exists_in_extension, structures
from dab.logic.qe import qe_cover
from dab.logic.terms import (
    App, Const, Cube, FunctionSymbol, Signature, SortInfo, StateVar, Var, eq, neq, undef,
)
from dab.model import UNDEF

SIG = Signature(
    [SortInfo("U", "id"), SortInfo("V", "value"), SortInfo("L", "value", ("a", "b"))],
    [FunctionSymbol("f", "U", "V"), FunctionSymbol("g", "U", "L")],
)
CARRIERS = {"U": ("u1", "u2", UNDEF), "V": ("v1", UNDEF), "L": ("a", "b", UNDEF)}

x = Var("x", "U")
s = StateVar("s", "U")
t = StateVar("t", "V")
fx = App("f", x, "V")
gx = App("g", x, "L")
A = Const("a", "L")

CUBES = {
    "image": [eq(fx, t)],
    "image-other-than-s": [eq(fx, t), neq(x, s), eq(gx, A)],
    "collision": [eq(fx, App("f", s, "V")), neq(x, s), neq(x, undef("U"))],
    "bound-to-s": [eq(x, s), neq(fx, t)],
    "closed-sort": [eq(gx, App("g", s, "L")), neq(gx, A), neq(x, undef("U"))],
    "null-axiom": [neq(x, undef("U")), eq(fx, undef("V"))],
}


def holds(cover, m: FiniteStructure) -> bool:
    return any(all(eval_literal(lit, m, {}) for lit in cube.literals) for cube in cover)


class TestCover:

    @staticmethod
    @pytest.mark.parametrize("name", sorted(CUBES))
    def test_agrees_with_extensions(name):
        literals = CUBES[name]
        cover = qe_cover([x], literals, SIG)
        for cube in cover:
            assert x not in cube.variables()
        for base in structures(SIG, CARRIERS):
            for su, tv in itertools.product(CARRIERS["U"], CARRIERS["V"]):
                m = FiniteStructure(base.carriers, base.functions, {"s": su, "t": tv})
                expected = exists_in_extension([x], literals, m, SIG, {})
                assert holds(cover, m) == expected, f"{name} with s={su}, t={tv}"

    @staticmethod
    def test_null_axiom_is_unsatisfiable():
        assert qe_cover([x], CUBES["null-axiom"], SIG) == []

    @staticmethod
    def test_substitution_by_equal_term():
        cover = qe_cover([x], CUBES["bound-to-s"], SIG)
        assert len(cover) == 1
        assert neq(App("f", s, "V"), t) in cover[0].literals

    @staticmethod
    def test_nothing_to_eliminate():
        cube = Cube.of([eq(s, undef("U"))])
        assert qe_cover([x], cube, SIG) == [cube]

    @staticmethod
    def test_cyclic_signature_is_refused():
        cyclic = Signature([SortInfo("U", "id")], [FunctionSymbol("next", "U", "U")])
        assert not cyclic.acyclic
        with pytest.raises(CyclicSignature):
            qe_cover([x], [eq(App("next", x, "U"), s)], cyclic)


POOL = [
    eq(fx, t), neq(fx, t), eq(x, s), neq(x, s), eq(gx, A), neq(gx, A), eq(x, undef("U")), neq(x, undef("U")),
    eq(fx, App("f", s, "V")), neq(fx, App("f", s, "V")), eq(gx, App("g", s, "L")), neq(gx, App("g", s, "L")),
]


@pytest.mark.slow
class TestRandomCubes:

    @staticmethod
    def test_agrees_with_extensions(rng):
        bases = list(structures(SIG, CARRIERS))
        for _ in range(25):
            literals = rng.sample(POOL, rng.randint(1, 4))
            cover = qe_cover([x], literals, SIG)
            for base in bases:
                for su, tv in itertools.product(CARRIERS["U"], CARRIERS["V"]):
                    m = FiniteStructure(base.carriers, base.functions, {"s": su, "t": tv})
                    expected = exists_in_extension([x], literals, m, SIG, {})
                    assert holds(cover, m) == expected, f"{[str(lit) for lit in literals]} with s={su}, t={tv}"


y = Var("y", "U")
w = Var("w", "V")
fy = App("f", y, "V")
gy = App("g", y, "L")

PAIR_POOL = POOL + [
    eq(x, y), neq(x, y), eq(fx, fy), neq(fx, fy), eq(gx, gy), neq(gx, gy),
    eq(y, s), neq(y, s), eq(fy, t), neq(fy, t), eq(gy, A), neq(gy, A), eq(y, undef("U")), neq(y, undef("U")),
    eq(fx, w), neq(fx, w), eq(w, t), neq(w, t), eq(w, undef("V")), neq(w, undef("V")), eq(fy, w),
]
ELIMINATED = [(x, y), (x, w), (x,), (y,)]


@pytest.mark.slow
class TestRandomPairCubes:

    @staticmethod
    def test_agrees_with_extensions(rng):
        bases = list(structures(SIG, CARRIERS))
        for k in range(500):
            variables = ELIMINATED[k % len(ELIMINATED)]
            usable = [lit for lit in PAIR_POOL
                      if {v for v in Cube.of([lit]).variables()} <= set(variables)]
            literals = rng.sample(usable, rng.randint(1, 5))
            cover = qe_cover(variables, literals, SIG)
            for cube in cover:
                assert not cube.variables() & set(variables)
            for base in bases:
                for su, tv in itertools.product(CARRIERS["U"], CARRIERS["V"]):
                    m = FiniteStructure(base.carriers, base.functions, {"s": su, "t": tv})
                    expected = exists_in_extension(variables, literals, m, SIG, {})
                    assert holds(cover, m) == expected, \
                        f"{[v.name for v in variables]}: {[str(lit) for lit in literals]} with s={su}, t={tv}"
