import json

import pytest

from backend.config import MODELS_DIR, PROPERTIES_DIR, SUITES_DIR
from dab.checks import VerificationMode
from dab.engine import (
    SAFE, UNKNOWN, UNSAFE, EngineConfig, backward_reachability, dump_tree, normalize, preimage, render_fixpoint,
)
from dab.logic.backends import INTERNAL
from dab.logic.smtlib import IN_PROCESS
from dab.oracle import rule_of
from dab.parser import parse_model, parse_property
from dab.translate import CREATE_CASE, translate, translate_property
from tests.conftest import read

BOUNDED = VerificationMode(case_bound=1)


def run(m, text, mode=BOUNDED, cfg=None):
    p = parse_property(text, m)
    return backward_reachability(translate(m, mode), translate_property(p, m, mode), cfg)


def suite_entries():
    suite = json.loads(read(SUITES_DIR / "hiring.json"))
    return [pytest.param(entry, id=entry["name"]) for entry in suite["entries"]]


class TestRequestModel:

    @staticmethod
    def test_completion_reachable(request_model):
        result = run(request_model, "property { i: Request = completed; }")
        assert result.verdict == UNSAFE
        rules = [rule_of(name) for name in result.trace]
        assert rules[0] == CREATE_CASE
        assert rules[-1] == "Request.T2"
        assert len(rules) == 8
        assert result.metrics.depth == len(rules)

    @staticmethod
    def test_pick_assigns_applicant(request_model):
        result = run(request_model, "property { i: Decide = enabled and applicant = undef; }",
                     cfg=EngineConfig(audit=True))
        assert result.verdict == SAFE
        assert result.safe
        assert result.fixpoint
        assert result.audit_ok is True

    @staticmethod
    def test_unbounded_cases(request_model):
        result = run(request_model, "property { i: Request = completed; }", mode=VerificationMode())
        assert result.verdict == UNSAFE

    @staticmethod
    @pytest.mark.slow
    def test_two_distinct_cases(request_model):
        result = run(request_model, "property { i: Request = completed; j: Request = completed; }",
                     mode=VerificationMode())
        assert result.verdict == UNSAFE
        assert sum(rule_of(name) == CREATE_CASE for name in result.trace) == 2

    @staticmethod
    def test_node_cap(request_model):
        result = run(request_model, "property { i: Request = completed; }", cfg=EngineConfig(max_nodes=1))
        assert result.verdict == UNKNOWN
        assert result.reason == "node cap 1 reached"

    @staticmethod
    def test_time_cap_checked_before_expansion(request_model):
        result = run(request_model, "property { i: Request = completed; }", cfg=EngineConfig(max_seconds=1e-9))
        assert result.verdict == UNKNOWN
        assert result.reason.startswith("time cap")
        assert all(n.parent is None for n in result.nodes)

    @staticmethod
    def test_syntactic_subsumption(request_model):
        result = run(request_model, "property { i: Request = completed; }")
        live = [n.cube for n in result.nodes if n.status == "live"]
        assert not any(a is not b and a.literals <= b.literals for a in live for b in live)

    @staticmethod
    def test_tree_dump(request_model):
        result = run(request_model, "property { i: Decide = enabled and applicant = undef; }")
        lines = dump_tree(result).splitlines()
        assert lines[0] == "# id parent transition depth status formula"
        assert len(lines) == result.metrics.nodes + 1
        assert lines[1].startswith("0 - - 0 ")
        assert render_fixpoint(result)


class TestPreimage:

    @staticmethod
    def test_untouched_cube_is_kept(request_model):
        system = translate(request_model, BOUNDED)
        (cube,) = translate_property(parse_property("property { i: Request = completed; }", request_model),
                                     request_model, BOUNDED)
        pick = [t for t in system.transitions if t.block == "Pick"]
        assert pick
        for t in pick:
            for pre in preimage(t, (cube,)):
                assert cube.literals <= pre.literals

    @staticmethod
    def test_completion_step(request_model):
        system = translate(request_model, BOUNDED)
        unsafe = translate_property(parse_property("property { i: Request = completed; }", request_model),
                                    request_model, BOUNDED)
        (t,) = [t for t in system.transitions if t.rule == "Request.T2"]
        pre = normalize(system, preimage(t, unsafe))
        assert pre
        assert all("lifecycle.Flow@1" in c.reads() for c in pre)


class TestTicketModel:

    @staticmethod
    def test_closed_ticket_has_owner(ticket_model):
        result = run(ticket_model, "property { i: CloseTicket = completed and owner = undef; }")
        assert result.verdict == SAFE

    @staticmethod
    def test_close_reachable(ticket_model):
        result = run(ticket_model, "property { i: CloseTicket = completed; }")
        assert result.verdict == UNSAFE
        assert "CloseTicket.T1" in [rule_of(name) for name in result.trace]


@pytest.mark.slow
class TestHiringSuite:

    @staticmethod
    @pytest.mark.parametrize("entry", suite_entries())
    def test_expected_verdict(entry):
        m = parse_model(read(MODELS_DIR / entry["model"]))
        mode = VerificationMode(entry["mode"].get("case_bound"), entry["mode"].get("repo_bound"),
                                entry["mode"].get("insertion", "multiset"))
        p = parse_property(read(PROPERTIES_DIR / entry["property"]), m)
        cfg = EngineConfig(max_seconds=entry.get("max_seconds", 600))
        result = backward_reachability(translate(m, mode), translate_property(p, m, mode), cfg)
        assert result.verdict == entry["expected"], result.reason


class TestBackendAgreement:

    @staticmethod
    def test_recording_is_opt_in(request_model):
        assert not run(request_model, "property { i: Request = completed; }").backend.log
        result = run(request_model, "property { i: Request = completed; }", cfg=EngineConfig(record_obligations=True))
        assert len(result.backend.log) == result.metrics.solver_calls
        assert result.backend.cross_check(INTERNAL) == []

    @staticmethod
    @pytest.mark.parametrize("text", ["property { i: Request = completed; }",
                                      "property { i: Decide = enabled and applicant = undef; }"],
                             ids=["unsafe", "safe"])
    def test_in_process_solver_agrees(request_model, text):
        pytest.importorskip("z3", reason="z3-solver not installed; backend agreement not checked")
        result = run(request_model, text, cfg=EngineConfig(record_obligations=True))
        assert result.backend.log
        assert result.backend.cross_check(IN_PROCESS) == []

    @staticmethod
    @pytest.mark.slow
    @pytest.mark.parametrize("entry", suite_entries())
    def test_hiring_obligations_agree(entry):
        pytest.importorskip("z3", reason="z3-solver not installed; backend agreement not checked")
        m = parse_model(read(MODELS_DIR / entry["model"]))
        p = parse_property(read(PROPERTIES_DIR / entry["property"]), m)
        result = backward_reachability(translate(m, BOUNDED), translate_property(p, m, BOUNDED),
                                       EngineConfig(max_seconds=entry["max_seconds"], record_obligations=True))
        assert result.backend.cross_check(IN_PROCESS) == []
