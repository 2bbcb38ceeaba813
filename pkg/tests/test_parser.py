import pytest

from dab.errors import ParseError
from dab.model import Atom, BlockKind, Eq, Fact, LifecycleIs, OneOf
from dab.parser import (
    parse_condition, parse_facts, parse_model, parse_property, render_facts, render_model, render_property,
)
from tests.conftest import REQUEST_MODEL


class TestModelParsing:

    @staticmethod
    def test_hiring_shape(hiring):
        assert hiring.root.name == "HP"
        assert hiring.root.kind == BlockKind.PROCESS
        assert len(hiring.blocks()) == 15
        assert len(hiring.updates) == 7
        assert hiring.data.ctype == "jobId"

    @staticmethod
    def test_update_kinds(hiring):
        kinds = {spec.name: spec.kind for spec in hiring.updates}
        assert kinds["InsUser"] == "set"
        assert kinds["EvalApp"] == "insert"
        assert kinds["MarkE"] == "cond-update"
        assert kinds["SelWinner"] == "delete"

    @staticmethod
    def test_repository_schema(hiring):
        application = hiring.data.relation("Application")
        assert hiring.data.is_repository("Application")
        assert application.arity == 7
        assert application.attribute_names[0] == "Jid"

    @staticmethod
    def test_comparisons_desugar_to_membership(hiring):
        guard = hiring.update("EvalApp").pre
        low, high = guard.body[0].items
        assert isinstance(low, OneOf) and isinstance(high, OneOf)
        assert len(low.values) == 100
        assert low.values == high.values

    @staticmethod
    def test_membership_literal(hiring):
        assert isinstance(parse_condition("qualif = true", hiring.data), Eq)
        guard = parse_model(REQUEST_MODEL).update("Approve").pre
        assert guard.body[0].items[0].values == frozenset({"true", "false"})

    @staticmethod
    def test_error_position():
        broken = REQUEST_MODEL.replace("applicant : userID;", "applicant : userID")
        with pytest.raises(ParseError) as info:
            parse_model(broken)
        line = REQUEST_MODEL.splitlines().index("  approved : Bool;") + 1
        assert info.value.line == line
        assert "expected ';'" in info.value.reason
        assert f"line {line}" in str(info.value)

    @staticmethod
    @pytest.mark.parametrize("text, fragment", [
        ("sorts { id a; }", "no process block"),
        ("sorts { pseudo a; } process P [start=none] { task T }", "unknown sort kind"),
        ("sorts { id a = {x}; } process P [start=none] { task T }", "carrier"),
        ("process P [start=none] { gadget T }", "unknown block kind"),
    ], ids=["no-process", "bad-sort-kind", "id-carrier", "bad-block-kind"])
    def test_rejects(text, fragment):
        with pytest.raises(ParseError) as info:
            parse_model(text)
        assert fragment in info.value.reason


class TestRendering:

    @staticmethod
    def test_request_round_trip(request_model):
        assert parse_model(render_model(request_model)) == request_model

    @staticmethod
    def test_hiring_round_trip(hiring):
        text = render_model(hiring)
        assert "{1..100}" in text or "1..100" in text
        assert parse_model(text) == hiring

    @staticmethod
    def test_property_round_trip(hiring, hiring_property):
        p = hiring_property("ineligible_after_marking")
        assert parse_property(render_property(p), hiring) == p

    @staticmethod
    def test_facts_round_trip(hiring):
        facts = [Fact("JobCategory", ("dev",)), Fact("User", ("alice", "Alice", "30"))]
        assert parse_facts(render_facts(facts)) == facts


class TestPropertyAndFacts:

    @staticmethod
    def test_two_indexes(hiring_property):
        p = hiring_property("two_completed")
        assert p.indexes == ("i", "j")
        for _, body in p.items():
            assert body[0].items == (LifecycleIs("HP", "completed"),)

    @staticmethod
    def test_lifecycle_and_repository_atoms(hiring_property):
        p = hiring_property("ineligible_after_marking")
        items = p.guards[0][0].items
        assert items[0] == LifecycleIs("DecideEligible", "completed")
        assert any(isinstance(item, Atom) and item.relation == "Application" for item in items)

    @staticmethod
    def test_trailing_input(hiring):
        with pytest.raises(ParseError):
            parse_property("property { i: HP = completed; } extra", hiring)

    @staticmethod
    def test_catalog_document(hiring_catalog):
        assert hiring_catalog.size == 2

    @staticmethod
    def test_facts_need_instance_keyword():
        with pytest.raises(ParseError):
            parse_facts("facts { User(alice); }")
