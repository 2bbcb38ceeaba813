"""
Randomly generated models, checked three ways: engine traces replay on the
oracle, oracle witnesses are found by the engine, and the translated system
steps exactly like the oracle on the control and case-data fragment.
"""
import random
from collections import deque
from typing import Dict, List, Optional, Tuple

import pytest

from dab.checks import VerificationMode
from dab.engine import SAFE, UNSAFE, EngineConfig, backward_reachability
from dab.logic.evaluate import FiniteStructure
from dab.model import SELF, UNDEF, validate_dab
from dab.oracle import Bounds, CatalogInstance, Snapshot, parameterized_bounded_check, replay_trace, rule_of, step
from dab.parser import parse_model, parse_property
from dab.translate import initial_structure, successors, translate, translate_property

MODE = VerificationMode(case_bound=1)
BOUNDS = Bounds(max_cases=2, max_rows=3, max_steps=500)
SIZE_BOUND = 2
MODELS = 100
MAX_DEPTH = 3
BISIMULATION_STATES = 400


class ModelGenerator:
    """Small well-formed models: at most two repository relations, three data
    case variables and blocks nested three deep"""

    def __init__(self, rng: random.Random, relations: bool = True):
        self.rng = rng
        self.catalog = relations and rng.random() < 0.5
        self.repos = rng.randint(0, 2) if relations else 0
        self.blocks: List[str] = []
        self.counter = 0

    def updates(self) -> Dict[str, str]:
        specs = {
            "SetFlag": "pre PickFlag(v: Bool) <- v in {true, false};\n    eff set flag = v;",
            "SetLabel": "pre PickLabel(l: Label) <- l in {low, high};\n    eff set lab = l;",
            "Clear": "pre Always <- true;\n    eff set lab = undef;",
        }
        if self.catalog:
            specs["GetItem"] = "pre GetItem(i, k) <- Item(i, k);\n    eff set item = i, lab = k;"
        if self.repos >= 1:
            specs["Put"] = "pre Always <- true;\n    eff insert (lab, flag) into Slot;"
            specs["Take"] = "pre Take(l, f) <- Slot(l, f);\n    eff delete (l, f) from Slot set lab = l, flag = f;"
        if self.repos >= 2:
            specs["Drop"] = "pre Always <- true;\n    eff insert (lab) into Bin;"
            specs["Fetch"] = "pre Fetch(l) <- Bin(l) and l = high;\n    eff delete (l) from Bin set lab = l;"
        return specs

    def name(self, prefix: str) -> str:
        self.counter += 1
        name = f"{prefix}{self.counter}"
        self.blocks.append(name)
        return name

    def condition(self) -> str:
        return self.rng.choice(["flag = true", "flag = false", "lab = low", "lab = high", "lab = undef"])

    def block(self, depth: int, updates: List[str], indent: int) -> str:
        pad = "  " * indent
        if depth >= MAX_DEPTH or self.rng.random() < 0.35:
            name = self.name("T")
            if self.rng.random() < 0.8:
                return f"{pad}task {name} [update={self.rng.choice(updates)}]"
            return f"{pad}task {name}"
        kind = self.rng.choice(["sequence", "parallel", "choice", "loop"])
        attrs = ""
        if kind == "choice":
            if self.rng.random() < 0.5:
                attrs = f" [excl, cond1=({self.condition()})]"
            else:
                attrs = f" [incl, cond1=({self.condition()}), cond2=({self.condition()})]"
        elif kind == "loop":
            attrs = f" [cond=({self.condition()})]"
        name = self.name(kind.capitalize())
        children = "\n".join(self.block(depth + 1, updates, indent + 1) for _ in range(2))
        return f"{pad}{kind} {name}{attrs} {{\n{children}\n{pad}}}"

    def model(self) -> str:
        specs = self.updates()
        lines = ["sorts {", "  case runId;", "  value Label = {low, high};"]
        if self.catalog:
            lines.append("  id itemID;")
        lines.append("}")
        if self.catalog:
            lines += ["catalog {", "  Item(Iid: itemID, Kind: Label);", "}"]
        if self.repos:
            lines += ["repository {", "  Slot(Tag: Label, On: Bool);"]
            if self.repos >= 2:
                lines.append("  Bin(Tag: Label);")
            lines.append("}")
        lines += ["casevars {", "  flag : Bool;", "  lab : Label;"]
        if self.catalog:
            lines.append("  item : itemID;")
        lines += ["  self : runId;", "}", "updates {"]
        for name, body in specs.items():
            lines += [f"  {name} {{", f"    {body}", "  }"]
        lines.append("}")
        lines += ["process Run [start=none] {", self.block(1, sorted(specs), 1), "}"]
        return "\n".join(lines) + "\n"

    def property(self) -> str:
        target = self.rng.choice(self.blocks)
        state = self.rng.choice(["completed", "completed", "enabled", "active"])
        extra = self.rng.choice(["", "", f" and {self.condition()}"])
        return f"property {{ i: {target} = {state}{extra}; }}"


def generated(seed: int, n: int, relations: bool = True) -> Tuple[str, str]:
    generator = ModelGenerator(random.Random(seed * 1000 + n), relations)
    text = generator.model()
    return text, generator.property()


def parsed(text: str):
    m = parse_model(text)
    report = validate_dab(m)
    assert report.ok, "\n".join(v.message for v in report.errors) + "\n" + text
    return m


class TestGenerator:

    @staticmethod
    def test_models_are_valid(seed):
        for n in range(20):
            text, prop = generated(seed, n)
            m = parsed(text)
            parse_property(prop, m)
            assert len(m.data.repository) <= 2
            assert len([v for v in m.data.case_vars if v.name != SELF]) <= 3

    @staticmethod
    def test_reproducible(seed):
        assert generated(seed, 7) == generated(seed, 7)


@pytest.mark.slow
class TestEngineAgainstOracle:

    @staticmethod
    @pytest.mark.parametrize("n", range(MODELS))
    def test_verdicts_agree(seed, n):
        text, prop = generated(seed, n)
        m = parsed(text)
        p = parse_property(prop, m)
        result = backward_reachability(translate(m, MODE), translate_property(p, m, MODE),
                                       EngineConfig(max_seconds=60))
        check = parameterized_bounded_check(m, MODE, BOUNDS, SIZE_BOUND, p)
        if result.verdict == UNSAFE:
            replay = replay_trace(m, MODE, result.trace, BOUNDS, p, size_bound=SIZE_BOUND)
            assert replay.confirmed, f"trace {result.trace} fails at step {replay.failed_step}\n{text}{prop}"
        if check.witnessed:
            assert result.verdict == UNSAFE, f"{result.reason}\n{check.witness.render()}\n{text}{prop}"
        if result.verdict == SAFE:
            assert not check.witnessed


def case_view(snapshot: Snapshot) -> Optional[Tuple[Tuple[str, str], ...]]:
    if not snapshot.cases:
        return None
    (case,) = snapshot.cases
    return case.values


def structure_view(state: Dict[str, str]) -> Optional[Tuple[Tuple[str, str], ...]]:
    if state[f"{SELF}@1"] == UNDEF:
        return None
    return tuple(sorted((name[:-2], value) for name, value in state.items() if name.endswith("@1")))


class TestStepBisimulation:

    @staticmethod
    @pytest.mark.parametrize("n", range(MODELS))
    def test_same_moves(seed, n):
        text, _ = generated(seed, n, relations=False)
        m = parsed(text)
        system = translate(m, MODE)
        carriers = {name: info.domain() if info.closed else ("case1", UNDEF)
                    for name, info in system.signature.sorts.items()}
        s0 = initial_structure(system, carriers)
        catalog = CatalogInstance.build({})
        bounds = Bounds(max_cases=1)
        start = Snapshot()
        seen = {start}
        frontier = deque([start])
        while frontier and len(seen) < BISIMULATION_STATES:
            snapshot = frontier.popleft()
            state = dict(s0.state)
            if snapshot.cases:
                for name, value in case_view(snapshot):
                    assert f"{name}@1" in state, name
                    state[f"{name}@1"] = value
            structure = FiniteStructure(s0.carriers, s0.functions, state, s0.arrays)
            assert structure_view(state) == case_view(snapshot)
            moves = step(snapshot, m, catalog, bounds)
            oracle_moves = {(move.rule, case_view(move.target)) for move in moves}
            system_moves = {(rule_of(name), structure_view(nxt.state))
                            for name, _, nxt in successors(system, structure)}
            assert system_moves == oracle_moves, f"from {snapshot.render() or 'no case'}\n{text}"
            for move in moves:
                if move.target not in seen:
                    seen.add(move.target)
                    frontier.append(move.target)
        assert len(seen) > 1
