import dataclasses

import pytest

from backend.config import MODELS_DIR
from dab.model import (
    And, Constant, Eq, LifecycleIs, Not, Property, Query, Sort, SortKind, Variable, case_vars, free_vars, is_cubical,
    is_repo_free, validate_dab, validate_data_schema, validate_property,
)
from dab.parser import parse_model, parse_property
from tests.conftest import REQUEST_MODEL, TICKET_MODEL, read


def codes(text: str):
    return validate_dab(parse_model(text)).codes()


class TestModelValidation:

    @staticmethod
    def test_hiring_is_valid(hiring):
        report = validate_dab(hiring)
        assert report.ok, [str(v) for v in report.errors]

    @staticmethod
    def test_data_schema_alone(hiring):
        assert validate_data_schema(hiring.data).ok
        extra = Sort("otherCase", SortKind.CASE)
        schema = dataclasses.replace(hiring.data, sorts=hiring.data.sorts + (extra,))
        assert "CaseSortCount" in validate_data_schema(schema).codes()

    @staticmethod
    def test_small_models_are_valid(request_model, ticket_model):
        assert validate_dab(request_model).ok
        assert validate_dab(ticket_model).ok

    @staticmethod
    def test_duplicate_block_name():
        report = validate_dab(parse_model(read(MODELS_DIR / "broken.dab")))
        assert not report.ok
        assert [v.code for v in report.errors] == ["DuplicateBlockName"]
        assert str(report.errors[0]).startswith("ERROR DuplicateBlockName:")

    @staticmethod
    @pytest.mark.parametrize("old, new, code", [
        ("  self : reqId;\n", "", "MissingSelf"),
        ("case reqId;", "case reqId;\n  case otherId;", "CaseSortCount"),
        ("User(Uid: userID, Level: Label)", "User(Level: Label, Uid: userID)", "CatalogKeyNotIdSort"),
        ("eff set applicant = u;", "eff set self = u;", "SelfAssigned"),
        ("pre GetUser(u) <- User(u, l);", "pre GetUser(u, w) <- User(u, l);", "AnswerVariableNotFree"),
        ("pre GetUser(u) <- User(u, l);", "pre GetUser(u, applicant) <- User(u, l) and applicant = u;",
         "CaseVarInHead"),
        ("[update=Approve]", "[update=Reject]", "UnknownUpdateSpec"),
        ("sequence Flow", "loop Flow", "BadBlockAttribute"),
        ("task Decide [update=Approve]", "task Decide [update=Approve]\n    task Extra", "BlockArity"),
        ("task Pick [update=PickUser]", "err-and-event Pick [type=msg, update=PickUser, label=Oops]",
         "UnknownErrorLabel"),
    ], ids=["missing-self", "two-case-sorts", "catalog-key-not-id", "self-assigned", "answer-not-free",
            "case-var-in-head", "unknown-update", "loop-without-cond", "sequence-arity", "unhandled-error"])
    def test_request_mutations(old, new, code):
        assert old in REQUEST_MODEL
        assert code in codes(REQUEST_MODEL.replace(old, new))

    @staticmethod
    @pytest.mark.parametrize("old, new, code", [
        ("  User(Uid: userID);", "  User(Uid: userID);\n  Admin(Aid: userID);", "AmbiguousPrimaryKey"),
        ("id userID;", "id userID;\n  id teamID;", None),
        ("task FileTicket [update=File]", "task FileTicket [nonatomic, update=File]", "NonAtomicRepoEffect"),
        ("key(Owner)", "key(Desk)", "UnknownKeyAttribute"),
    ], ids=["ambiguous-key", "unused-sort", "nonatomic-insert", "unknown-key-attribute"])
    def test_ticket_mutations(old, new, code):
        found = codes(TICKET_MODEL.replace(old, new))
        if code is None:
            assert found == []
        else:
            assert code in found

    @staticmethod
    def test_dangling_foreign_key():
        text = TICKET_MODEL.replace("id userID;", "id userID;\n  id deskKey;\n  id teamID;").replace(
            "  User(Uid: userID);", "  User(Uid: userID);\n  Desk(Did: deskKey, Manager: teamID);")
        assert "DanglingForeignKey" in codes(text)

    @staticmethod
    def test_report_sorted_by_code():
        text = REQUEST_MODEL.replace("  self : reqId;\n", "").replace("[update=Approve]", "[update=Reject]")
        first = validate_dab(parse_model(text))
        assert first.codes() == sorted(first.codes())
        assert len(first.errors) >= 2


class TestPropertyValidation:

    @staticmethod
    def test_shipped_property_is_valid(hiring, hiring_property):
        assert validate_property(hiring_property("ineligible_after_marking"), hiring).ok

    @staticmethod
    def test_empty_property_is_a_warning(request_model):
        report = validate_property(parse_property("property { }", request_model), request_model)
        assert report.ok
        assert [v.code for v in report.warnings] == ["DegenerateEmptyProperty"]

    @staticmethod
    def test_duplicate_index(request_model):
        p = parse_property("property { i: Pick = enabled; i: Decide = enabled; }", request_model)
        assert "DuplicateIndex" in validate_property(p, request_model).codes()

    @staticmethod
    @pytest.mark.parametrize("atom, code", [
        (LifecycleIs("Nowhere", "enabled"), "UnknownBlock"),
        (LifecycleIs("Pick", "finished"), "IllegalLifecycleState"),
    ], ids=["unknown-block", "bad-state"])
    def test_lifecycle_atoms(request_model, atom, code):
        p = Property(("i",), ((Query((atom,)),),))
        assert code in validate_property(p, request_model).codes()

    @staticmethod
    def test_data_variable_must_be_covered(request_model):
        p = parse_property("property { i: Pick = enabled and applicant = u; }", request_model)
        assert "UncoveredDataVariable" in validate_property(p, request_model).codes()


class TestQueryHelpers:

    @staticmethod
    def test_free_and_case_variables(hiring):
        pre = hiring.update("SelWinner").pre
        assert free_vars(pre, hiring.data) == {"j", "jc", "u", "n", "a", "s", "e"}
        assert case_vars(pre, hiring.data) == {"self"}
        assert case_vars(hiring.update("InsUser").pre, hiring.data) == frozenset()

    @staticmethod
    def test_repo_free(hiring):
        assert is_repo_free(hiring.update("InsUser").pre, hiring.data)
        assert not is_repo_free(hiring.update("SelWinner").pre, hiring.data)

    @staticmethod
    def test_cubical():
        a = Eq(Variable("x"), Constant("1"))
        b = Eq(Variable("y"), Constant("2"))
        assert is_cubical(And(Not(a), b))
        assert not is_cubical(Not(And(a, b)))


class TestExports:

    @staticmethod
    def test_public_names_resolve():
        import dab.model as model
        assert all(hasattr(model, name) for name in model.__all__)
        assert "validate_data_schema" in model.__all__
        assert not {"dataclass", "logger", "Counter"} & set(model.__all__)
