import pytest

from dab.checks import VerificationMode
from dab.errors import TooManyIndexes
from dab.logic.terms import Var, neq
from dab.model import BOOL, UNDEF
from dab.oracle import rule_of
from dab.parser import parse_model
from dab.translate import (
    CREATE_CASE, PI_INDEX, apply_transition, emit_arts, emit_mcmt_like, initial_structure, rewrite_update,
    successors, translate, translate_block, translate_property, validate_shape,
)
from tests.test_lifecycle import SHAPES_MODEL

BOUNDED = VerificationMode(case_bound=1)
UNBOUNDED = VerificationMode()


class TestLayout:

    @staticmethod
    def test_hiring_bounded(hiring):
        system = translate(hiring, BOUNDED)
        assert len(system.variables) == 24
        assert all(v.name.endswith("@1") for v in system.variables)
        assert system.variable("lifecycle.HP@1").initial == "idle"
        assert system.variable("self@1").initial == UNDEF
        assert len(system.components) == 8
        assert {c.source for c in system.components} == {"Application_index"}
        assert system.component("Application.#row").target == BOOL

    @staticmethod
    def test_hiring_unbounded(hiring):
        system = translate(hiring, UNBOUNDED)
        assert system.variables == ()
        case_arrays = [c for c in system.components if c.source == PI_INDEX]
        assert len(case_arrays) == 24
        assert len(system.components) == 32

    @staticmethod
    def test_repo_bound_uses_slots(hiring):
        system = translate(hiring, VerificationMode(case_bound=1, repo_bound=2))
        assert system.components == ()
        assert len(system.variables) == 24 + 8 * 2
        assert system.variable("Application.#row/2") is not None
        assert "Application_index" not in system.signature.sorts

    @staticmethod
    def test_banks(hiring):
        system = translate(hiring, VerificationMode(case_bound=2))
        assert len(system.variables) == 48
        assert {t.bank for t in system.transitions} == {1, 2}
        assert system.transition(f"{CREATE_CASE}@2").rule == CREATE_CASE
        assert "case2" in system.signature.constants_of("jobId")


class TestTransitions:

    @staticmethod
    @pytest.mark.parametrize("mode", [BOUNDED, UNBOUNDED, VerificationMode(case_bound=1, repo_bound=1)],
                             ids=["bounded", "unbounded", "repo-bounded"])
    def test_hiring_shape(hiring, mode):
        assert validate_shape(translate(hiring, mode)) == []

    @staticmethod
    def test_small_models_shape(request_model, ticket_model):
        for m in (request_model, ticket_model, parse_model(SHAPES_MODEL)):
            assert validate_shape(translate(m, BOUNDED)) == []
            assert validate_shape(translate(m, UNBOUNDED)) == []

    @staticmethod
    def test_rule_names(hiring):
        system = translate(hiring, BOUNDED)
        rules = {t.rule for t in system.transitions}
        assert "EvaluateApplication.T1" in rules
        assert "DecideEligible.T1" in rules
        assert all(t.name.startswith(t.rule) for t in system.transitions)

    @staticmethod
    def test_create_case_runs_once(request_model):
        system = translate(request_model, BOUNDED)
        s0 = initial_structure(system, {"reqId": ("case1", UNDEF)})
        create = system.transition(f"{CREATE_CASE}@1")
        s1 = apply_transition(create, s0, {})
        assert s1 is not None
        assert s1.state["self@1"] == "case1"
        assert s1.state["lifecycle.Request@1"] == "enabled"
        assert apply_transition(create, s1, {}) is None

    @staticmethod
    def test_only_case_creation_is_enabled_initially(request_model):
        system = translate(request_model, BOUNDED)
        s0 = initial_structure(system, {"reqId": ("case1", UNDEF)})
        assert {rule_of(name) for name, _, _ in successors(system, s0)} == {CREATE_CASE}

    @staticmethod
    def test_translate_block(request_model):
        system = translate(request_model, BOUNDED)
        own = translate_block(request_model, request_model.block("Pick"), BOUNDED)
        assert own
        assert {t.name for t in own} == {t.name for t in system.transitions if t.block == "Pick"}

    @staticmethod
    def test_rewrite_update_writes_case_variable(request_model):
        fragments = rewrite_update(request_model, request_model.update("Approve"), BOUNDED)
        assert fragments
        for _, groups in fragments:
            assert any("approved@1" in g.targets for g in groups)


class TestProperty:

    @staticmethod
    def test_too_many_indexes(hiring, hiring_property):
        with pytest.raises(TooManyIndexes):
            translate_property(hiring_property("two_completed"), hiring, BOUNDED)

    @staticmethod
    def test_two_indexes_are_distinct(hiring, hiring_property):
        unsafe = translate_property(hiring_property("two_completed"), hiring, UNBOUNDED)
        assert unsafe
        p1, p2 = Var("%p1", PI_INDEX), Var("%p2", PI_INDEX)
        for cube in unsafe:
            assert neq(p1, p2) in cube.literals

    @staticmethod
    def test_bounded_property_reads_bank(hiring, hiring_property):
        unsafe = translate_property(hiring_property("hiring_completed"), hiring, BOUNDED)
        assert len(unsafe) == 1
        assert unsafe[0].reads() == {"self@1", "lifecycle.HP@1"}


class TestEmission:

    @staticmethod
    def test_arts(request_model):
        text = emit_arts(translate(request_model, BOUNDED))
        assert text.startswith("# artifact system (cases=1, repo=unbounded, insertion=multiset)")
        assert f"transition {CREATE_CASE}@1 [rule={CREATE_CASE}] {{" in text
        assert "lifecycle.Pick@1: Lifecycle = idle;" in text

    @staticmethod
    def test_mcmt_like(request_model):
        text = emit_mcmt_like(translate(request_model, UNBOUNDED))
        assert text.startswith(":comment")
        assert ":initial" in text
        assert f":comment {CREATE_CASE}" in text
