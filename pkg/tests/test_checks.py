import pytest

from dab.checks import (
    CASE_BOUNDED, DEC_CASE_BOUNDED, DEC_CASE_REPO_BOUNDED, DEC_CASE_UNBOUNDED, LOCAL, NEITHER, SET,
    STRONGLY_LOCAL, UNRESTRICTED, VerificationMode, characteristic_graph, classify, cube_locality, diagnose_spec,
    formula_locality_class, is_acyclic, is_case_identifier_agnostic, is_separated,
)
from dab.logic.terms import Cube, Read, StateVar, Var, eq
from dab.parser import parse_model
from dab.translate import PI_INDEX, translate_property
from tests.conftest import TICKET_MODEL

CYCLIC_MODEL = """
sorts {
  id deptID;
  id empID;
  case reqId;
}

catalog {
  Dept(Did: deptID, Head: empID);
  Emp(Eid: empID, Works: deptID);
}

casevars {
  self : reqId;
}

process Cyclic [start=none] {
  task Noop
}
"""


def diagnostic(classification, name):
    return next(d for d in classification.diagnostics if d.spec == name)


class TestCharacteristicGraph:

    @staticmethod
    def test_hiring_edges(hiring):
        graph = characteristic_graph(hiring.data.catalog)
        assert graph.has_edge(("User", "Uid"), ("User", "Name"))
        assert graph.has_edge(("User", "Uid"), ("User", "Age"))
        assert graph.number_of_edges() == 2
        assert is_acyclic(graph)

    @staticmethod
    def test_mutual_foreign_keys_are_cyclic():
        m = parse_model(CYCLIC_MODEL)
        graph = characteristic_graph(m.data.catalog)
        assert graph.has_edge(("Dept", "Head"), ("Emp", "Eid"))
        assert graph.has_edge(("Emp", "Works"), ("Dept", "Did"))
        assert not is_acyclic(graph)

    @staticmethod
    def test_cyclic_catalog_blocks_termination():
        c = classify(parse_model(CYCLIC_MODEL), VerificationMode(case_bound=1))
        assert c.termination is None
        assert "catalog is cyclic" in c.termination_reason


class TestClassification:

    @staticmethod
    def test_hiring_not_agnostic(hiring):
        assert not is_case_identifier_agnostic(hiring)

    @staticmethod
    def test_hiring_case_bounded(hiring):
        c = classify(hiring, VerificationMode(case_bound=1))
        assert c.sound_complete == CASE_BOUNDED
        assert c.termination == DEC_CASE_BOUNDED
        assert c.acyclic and not c.agnostic
        assert c.guaranteed
        assert all(d.passed for d in c.diagnostics)

    @staticmethod
    def test_hiring_unbounded(hiring):
        c = classify(hiring, VerificationMode())
        assert c.sound_complete is None
        assert c.sound_complete_reason == "mentions self: EvalApp, MarkE, SelWinner"
        assert c.termination is None
        assert "unbounded cases with self" in c.termination_reason

    @staticmethod
    def test_repo_bound(hiring):
        c = classify(hiring, VerificationMode(case_bound=2, repo_bound=3))
        assert c.termination == DEC_CASE_REPO_BOUNDED

    @staticmethod
    def test_set_insertion(hiring):
        c = classify(hiring, VerificationMode(case_bound=1, insertion=SET))
        assert c.termination is None
        assert "set insertion semantics" in c.termination_reason

    @staticmethod
    def test_agnostic_model_unbounded(ticket_model):
        c = classify(ticket_model, VerificationMode())
        assert c.sound_complete == UNRESTRICTED
        assert c.termination == DEC_CASE_UNBOUNDED

    @staticmethod
    @pytest.mark.parametrize("case_bound, repo_bound, insertion", [
        (0, None, "multiset"),
        (None, 0, "multiset"),
        (1, None, "bag"),
    ], ids=["zero-cases", "zero-repo", "unknown-insertion"])
    def test_mode_rejects(case_bound, repo_bound, insertion):
        with pytest.raises(ValueError):
            VerificationMode(case_bound, repo_bound, insertion)


class TestUpdateSpecBullets:

    @staticmethod
    def test_hiring_bullets(hiring):
        c = classify(hiring, VerificationMode(case_bound=1))
        assert [b.bullet for b in diagnostic(c, "EvalApp").checks] == ["insert: precondition repo-free"]
        assert [b.bullet for b in diagnostic(c, "InsUser").checks] == ["set: precondition repo-free"]
        assert [b.bullet for b in diagnostic(c, "SelWinner").checks] == [
            "delete: precondition separated", "delete: all case variables except self assigned"]
        assert len(diagnostic(c, "MarkE").checks) == 3

    @staticmethod
    def test_insert_reading_repository():
        m = parse_model(TICKET_MODEL.replace("pre GetUser(u) <- User(u);", "pre GetUser(u) <- Ticket(u, s);"))
        d = diagnose_spec(m.update("File"), m.data)
        assert not d.passed
        assert d.checks[0].detail == "precondition queries the repository"
        c = classify(m, VerificationMode())
        assert c.termination is None
        assert "update specifications failing: File" in c.termination_reason

    @staticmethod
    def test_delete_must_assign_case_variables():
        m = parse_model(TICKET_MODEL.replace("from Ticket set owner = u;", "from Ticket;"))
        d = diagnose_spec(m.update("Close"), m.data)
        failed = [b for b in d.checks if not b.passed]
        assert [b.bullet for b in failed] == ["delete: all case variables except self assigned"]
        assert failed[0].detail == "not assigned: owner"

    @staticmethod
    def test_two_repository_atoms_are_not_separated(ticket_model):
        m = parse_model(TICKET_MODEL.replace(
            "pre Pick(u) <- Ticket(u, s) and s = open;", "pre Pick(u) <- Ticket(u, s) and Ticket(v, t);"))
        separated, witnesses = is_separated(m.update("Close").pre, m.data)
        assert not separated
        assert witnesses == [None]
        ok, _ = is_separated(ticket_model.update("Close").pre, ticket_model.data)
        assert ok

    @staticmethod
    def test_self_counts_as_constant_when_bounded(hiring):
        spec = hiring.update("SelWinner")
        assert not is_separated(spec.pre, hiring.data)[0]
        assert is_separated(spec.pre, hiring.data, self_is_constant=True)[0]


class TestLocality:

    p1 = Var("%p1", PI_INDEX)
    p2 = Var("%p2", PI_INDEX)

    def test_property_cubes_are_strongly_local(self, hiring, hiring_property):
        unsafe = translate_property(hiring_property("two_completed"), hiring, VerificationMode())
        assert formula_locality_class(unsafe) == STRONGLY_LOCAL

    def test_state_variable_makes_it_local(self):
        cube = Cube.of([eq(Read("winner", self.p1, "userID"), StateVar("uid", "userID"))])
        assert cube_locality(cube) == LOCAL

    def test_two_indexes_in_one_literal(self):
        cube = Cube.of([eq(Read("winner", self.p1, "userID"), Read("uid", self.p2, "userID"))])
        assert cube_locality(cube) == NEITHER
        assert formula_locality_class((Cube.of([eq(self.p1, self.p2)]), cube)) == NEITHER
