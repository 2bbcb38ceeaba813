import pytest

from dab.errors import ArityMismatch
from dab.logic.backends import is_sat
from dab.logic.evaluate import FiniteStructure, evaluate
from dab.logic.terms import (
    App, CatalogAtom, Exists, FAnd, FOr, StateVar, Var, catalog_to_signature, eq, neq, rewrite_catalog_atoms,
    to_cubes, undef,
)
from dab.model import UNDEF

u = Var("u", "userID")
n = Var("n", "StringName")
a = Var("a", "NumAge")
NAME = App("f_User_Name", u, "StringName")
AGE = App("f_User_Age", u, "NumAge")


class TestCatalogSignature:

    @staticmethod
    def test_hiring_functions(hiring):
        sig = catalog_to_signature(hiring.data)
        assert sig.relations["User"] == ("userID", ("f_User_Name", "f_User_Age"))
        assert sig.relations["JobCategory"] == ("jobcatID", ())
        name = sig.functions["f_User_Name"]
        assert (name.source, name.target) == ("userID", "StringName")
        assert sig.acyclic
        assert sig.depth == 1
        assert sig.sort("NumScore").closed
        assert sig.constants_of("StringDate") == ("under_month", "month_passed")

    @staticmethod
    def test_positive_atom(hiring):
        sig = catalog_to_signature(hiring.data)
        phi = rewrite_catalog_atoms(CatalogAtom("User", (u, n, a)), sig)
        assert phi == FAnd((neq(u, undef("userID")), eq(n, NAME), eq(a, AGE)))

    @staticmethod
    def test_negated_atom_is_dual(hiring):
        sig = catalog_to_signature(hiring.data)
        phi = rewrite_catalog_atoms(CatalogAtom("User", (u, n, a), negated=True), sig)
        assert phi == FOr((eq(u, undef("userID")), neq(n, NAME), neq(a, AGE)))
        assert len(to_cubes(phi)) == 3

    @staticmethod
    def test_rewrites_under_quantifiers(hiring):
        sig = catalog_to_signature(hiring.data)
        j = Var("j", "jobcatID")
        phi = rewrite_catalog_atoms(Exists((j,), FAnd((CatalogAtom("JobCategory", (j,)),))), sig)
        assert phi == Exists((j,), FAnd((FAnd((neq(j, undef("jobcatID")),)),)))

    @staticmethod
    @pytest.mark.parametrize("relation, args", [("User", (u,)), ("Application", (u, n))],
                             ids=["arity", "repository"])
    def test_rejected_atoms(hiring, relation, args):
        sig = catalog_to_signature(hiring.data)
        with pytest.raises(ArityMismatch):
            rewrite_catalog_atoms(CatalogAtom(relation, args), sig)

    @staticmethod
    def test_formula_satisfiability(hiring):
        sig = catalog_to_signature(hiring.data)
        known = StateVar("name", "StringName")
        phi = Exists((u, n, a), FAnd((CatalogAtom("User", (u, n, a)), eq(n, known), eq(n, undef("StringName")))))
        assert not is_sat(phi, sig)
        assert is_sat(Exists((u, n, a), FAnd((CatalogAtom("User", (u, n, a)), eq(n, known)))), sig)


class TestEvaluation:

    M = FiniteStructure(
        {"userID": ("alice", "bob", UNDEF), "StringName": ("Alice", UNDEF)},
        {"f_User_Name": {"alice": "Alice", "bob": "Alice", UNDEF: UNDEF}},
        {"name": "Alice"},
    )

    def test_exists(self):
        x = Var("x", "userID")
        body = FAnd((neq(x, undef("userID")), eq(App("f_User_Name", x, "StringName"), StateVar("name", "StringName"))))
        assert evaluate(Exists((x,), body), self.M)
        assert not evaluate(Exists((x,), FAnd((body, eq(x, undef("userID"))))), self.M)

    def test_free_variables(self):
        assert evaluate(eq(App("f_User_Name", u, "StringName"), StateVar("name", "StringName")), self.M, {"u": "bob"})
        assert not evaluate(neq(u, undef("userID")), self.M, {"u": UNDEF})

    def test_catalog_atoms_need_rewriting(self):
        with pytest.raises(TypeError):
            evaluate(CatalogAtom("User", (u,)), self.M)
