import re

import pytest

from dab.lifecycle import (
    ACTIVE, COMPLETED, ENABLED, ERROR, IDLE, WAITING, block_rules, condition_cubes, flag_blocks, lifecycle_closed,
    lifecycle_graph, model_rules, nonatomic_tasks,
)
from dab.model import EXCEPTION_KINDS, And, BlockKind, Eq, Not, Variable, Constant, validate_dab
from dab.parser import parse_model

# One block of every kind.
SHAPES_MODEL = """
sorts {
  case runId;
}

casevars {
  flag : Bool;
  self : runId;
}

process Shapes [start=none] {
  n-sequence Steps {
    parallel Both {
      task A [nonatomic]
      empty Skip
    }
    choice Pick [excl, cond1=(flag = true)] {
      task B
      task C
    }
    choice Some [incl, cond1=(flag = true), cond2=(flag = false)] {
      task D
      task E
    }
    deferred-choice Wait {
      catch-event M1 [type=msg]
      catch-event M2 [type=timer]
    }
    event-driven-choice Race {
      catch-event M3 [type=msg]
      catch-event M4 [type=timer]
      task F
      task G
    }
    loop Again [cond=(flag = true)] {
      task H
      task I
    }
    possible-completion Early [cond=(flag = true), end=none] {
      task J
    }
    backward-exception Retry [boundary=timer] {
      subprocess Sub1 {
        process P1 {
          task K
        }
      }
      task L
    }
    non-interrupting-exception Side [boundary=msg] {
      subprocess Sub2 {
        process P2 {
          task N
        }
      }
      task O
      task Q
    }
  }
}
"""


@pytest.fixture(scope="module")
def shapes():
    return parse_model(SHAPES_MODEL)


def rule(m, name):
    return next(r for r in model_rules(m) if r.name == name)


# Rules per block kind. n-sequence counts rule schemas (its middle rule repeats
# per inner child). Exception blocks add three T_err rules for a msg/timer
# boundary; a backward exception also has the retry rule T4.
RULE_TABLE = {
    "atomic-task": 1, "nonatomic-task": 2, BlockKind.EVENT: 1, BlockKind.EMPTY: 1,
    BlockKind.SEQUENCE: 3, BlockKind.NSEQUENCE: 4, BlockKind.PARALLEL: 2, "or": 6, BlockKind.CHOICE: 4,
    BlockKind.DEFERRED: 4, BlockKind.LOOP: 4, BlockKind.PROCESS: 2, BlockKind.SUBPROCESS: 2,
    BlockKind.COMPLETION: 3, BlockKind.BACKWARD: 3 + 1, BlockKind.FORWARD: 5, BlockKind.NON_INTERRUPTING: 5,
    BlockKind.EVENT_CHOICE: 5, BlockKind.ERR_EVENT: 2,
}


def table_key(b):
    if b.kind == BlockKind.TASK:
        return "atomic-task" if b.atomic else "nonatomic-task"
    if b.kind == BlockKind.CHOICE and b.has("incl"):
        return "or"
    return b.kind


def expected_rules(b) -> int:
    count = RULE_TABLE[table_key(b)]
    if b.kind in EXCEPTION_KINDS and b.attr("boundary") in ("msg", "timer"):
        count += 3
    return count


def rule_count(m, b) -> int:
    labels = [r.label for r in block_rules(m, b)]
    if b.kind == BlockKind.NSEQUENCE:
        return len({re.sub(r"_\d+$", "", label) for label in labels})
    return len(labels)


class TestRuleCounts:

    @staticmethod
    def test_shapes_model_is_valid(shapes):
        assert validate_dab(shapes).ok

    @staticmethod
    def test_every_kind(shapes):
        for b in shapes.blocks():
            assert rule_count(shapes, b) == expected_rules(b), b.name

    @staticmethod
    def test_hiring(hiring):
        for b in hiring.blocks():
            assert rule_count(hiring, b) == expected_rules(b), b.name

    @staticmethod
    def test_table_covers_the_shapes(shapes, hiring):
        kinds = {table_key(b) for m in (shapes, hiring) for b in m.blocks()}
        assert kinds == set(RULE_TABLE)

    @staticmethod
    def test_nsequence_instances(shapes):
        labels = [r.label for r in block_rules(shapes, shapes.block("Steps"))]
        assert labels[:2] == ["T1", "T2"]
        assert labels[-1] == "T4"
        assert len(labels) == len(shapes.block("Steps").children) + 1

    @staticmethod
    def test_rule_names_unique(hiring, shapes):
        for m in (hiring, shapes):
            names = [r.name for r in model_rules(m)]
            assert len(names) == len(set(names))

    @staticmethod
    def test_flags_and_nonatomic(shapes, hiring):
        assert flag_blocks(shapes) == ["Side"]
        assert flag_blocks(hiring) == []
        assert nonatomic_tasks(shapes) == []  # A has no update specification
        assert nonatomic_tasks(hiring) == []


class TestRuleEffects:

    @staticmethod
    def test_atomic_task(hiring):
        r = rule(hiring, "EvaluateCV.T1")
        assert r.requires == (("EvaluateCV", ENABLED),)
        assert r.update == "CheckQual"
        assert r.sets == (("EvaluateCV", COMPLETED),)

    @staticmethod
    def test_nonatomic_task(shapes):
        first, second = block_rules(shapes, shapes.block("A"))
        assert first.sets == (("A", ACTIVE),)
        assert second.requires == (("A", ACTIVE),)

    @staticmethod
    def test_error_event_resets_protected_block(hiring):
        r = rule(hiring, "AppReceived.T2")
        assert r.update == "Deadline"
        sets = dict(r.sets)
        assert sets["Collect"] == ERROR
        assert sets["AppReceived"] == IDLE
        assert sets["EvaluateApplication"] == IDLE

    @staticmethod
    def test_loop_exit_condition(hiring):
        r = rule(hiring, "Applications.T4")
        (cond, positive), = r.conditions
        assert positive
        assert cond == Eq(Variable("qualif"), Constant("true"))

    @staticmethod
    def test_timer_boundary_adds_rules(shapes):
        labels = [r.label for r in block_rules(shapes, shapes.block("Retry"))]
        assert labels[-3:] == ["Terr1", "Terr2", "Terr3"]


class TestLifecycleClosure:

    @staticmethod
    def test_every_block_returns_to_idle(shapes, hiring):
        for m in (shapes, hiring):
            for b in m.blocks():
                assert lifecycle_closed(m, b), b.name

    @staticmethod
    def test_task_cycle(hiring):
        graph = lifecycle_graph(hiring, "EvaluateCV")
        assert graph.has_edge(IDLE, ENABLED)
        assert graph.has_edge(ENABLED, COMPLETED)
        assert graph.has_edge(COMPLETED, IDLE)

    @staticmethod
    def test_retry_closes_the_handler(shapes):
        graph = lifecycle_graph(shapes, "L")
        assert "Retry.T4" in graph.edges[COMPLETED, IDLE]["rules"]

    @staticmethod
    def test_root_completes(hiring):
        graph = lifecycle_graph(hiring, "HP")
        assert graph.has_edge(ENABLED, WAITING)
        assert lifecycle_closed(hiring, hiring.root)


class TestConditionCubes:

    @staticmethod
    def test_negated_conjunction():
        a = Eq(Variable("x"), Constant("1"))
        b = Eq(Variable("y"), Constant("2"))
        assert condition_cubes(And(a, b)) == [(a, b)]
        assert condition_cubes(And(a, b), positive=False) == [(Not(a),), (a, Not(b))]
        assert condition_cubes(Not(a)) == [(Not(a),)]
