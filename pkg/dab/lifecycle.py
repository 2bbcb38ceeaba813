"""
Block lifecycle rules.

Each block kind contributes a fixed set of rules that move the lifecycle
states of the block and its children. A rule is pure data: lifecycle and flag
requirements, gateway conditions, an optional update specification to fire,
and the lifecycle/flag assignments it performs. Translation compiles the rules
into transitions; the oracle interprets them directly on snapshots.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import networkx as nx

from dab.model import (
    LIFECYCLE_STATES, And, BlockKind, Block, Condition, DabModel, Eq, Item, LifecycleIs, Not, OneOf, TrueCond,
    error_handler,
)

logger = logging.getLogger(__name__)

IDLE, ENABLED, ACTIVE, WAITING = "idle", "enabled", "active", "waiting"
WAITING1, WAITING2, COMPLETED, ERROR = "waiting1", "waiting2", "completed", "error"

# stages of an update specification firing
FIRE, ACTIVATE, COMPLETE = "fire", "activate", "complete"


@dataclass(frozen=True)
class BlockRule:
    block: str
    label: str
    requires: Tuple[Tuple[str, str], ...] = ()
    flags: Tuple[Tuple[str, bool], ...] = ()
    conditions: Tuple[Tuple[Condition, bool], ...] = ()
    update: Optional[str] = None
    stage: str = FIRE
    sets: Tuple[Tuple[str, str], ...] = ()
    set_flags: Tuple[Tuple[str, bool], ...] = ()

    @property
    def name(self) -> str:
        return f"{self.block}.{self.label}"

    def mentioned(self) -> List[str]:
        return [b for b, _ in self.requires] + [b for b, _ in self.sets]


def condition_cubes(cond: Condition, positive: bool = True) -> List[Tuple[Item, ...]]:
    """Disjunctive normal form of a (possibly negated) cubical condition; negation is orthogonal"""
    if isinstance(cond, TrueCond):
        return [()] if positive else []
    if isinstance(cond, (Eq, OneOf, LifecycleIs)):
        return [(cond,)] if positive else [(Not(cond),)]
    if isinstance(cond, Not):
        return condition_cubes(cond.body, not positive)
    if isinstance(cond, And):
        left_pos = condition_cubes(cond.left, True)
        right_pos = condition_cubes(cond.right, True)
        if positive:
            return [a + b for a in left_pos for b in right_pos]
        return condition_cubes(cond.left, False) + [
            a + b for a in left_pos for b in condition_cubes(cond.right, False)]
    raise TypeError(f"not a condition: {cond!r}")


def _protected_reset(m: DabModel, handler: Block) -> Tuple[Tuple[str, str], ...]:
    """Handler's protected block goes to error and everything inside it back to idle"""
    protected = handler.children[0]
    return ((protected.name, ERROR),) + tuple((d.name, IDLE) for d in protected.descendants())


def _enclosing_process(m: DabModel, b: Block) -> Optional[Block]:
    for ancestor in m.ancestors(b.name):
        if ancestor.kind == BlockKind.PROCESS:
            return ancestor
    return None


def _early_completion(m: DabModel, b: Block) -> Tuple[Tuple[str, str], ...]:
    process = _enclosing_process(m, b)
    if process is None or not process.children:
        return ()
    body = process.children[0]
    resets = tuple((d.name, IDLE) for d in body.descendants())
    return resets + ((body.name, COMPLETED),)


def _boundary_rules(m: DabModel, b: Block) -> List[BlockRule]:
    """Spontaneous message/timer boundary firing while the protected block runs"""
    if b.attr("boundary") not in ("msg", "timer"):
        return []
    protected = b.children[0]
    rules = []
    for k, state in enumerate((ENABLED, WAITING, ACTIVE), start=1):
        if b.kind == BlockKind.NON_INTERRUPTING:
            rules.append(BlockRule(b.name, f"Terr{k}", requires=((protected.name, state),),
                                   set_flags=((b.name, True),)))
        else:
            resets = tuple((d.name, IDLE) for d in protected.descendants())
            rules.append(BlockRule(b.name, f"Terr{k}", requires=((protected.name, state),),
                                   sets=((protected.name, ERROR),) + resets))
    return rules


def block_rules(m: DabModel, b: Block) -> List[BlockRule]:
    """The rule set of one block, in declaration order"""
    name = b.name
    kids = [c.name for c in b.children]
    parent = m.parents().get(name)
    kind = b.kind
    R = BlockRule

    if kind == BlockKind.TASK:
        if b.atomic:
            return [R(name, "T1", requires=((name, ENABLED),), update=b.update, sets=((name, COMPLETED),))]
        return [
            R(name, "T1", requires=((name, ENABLED),), update=b.update, stage=ACTIVATE, sets=((name, ACTIVE),)),
            R(name, "T2", requires=((name, ACTIVE),), update=b.update, stage=COMPLETE, sets=((name, COMPLETED),)),
        ]
    if kind == BlockKind.EVENT:
        sets = ((name, COMPLETED),)
        if parent is not None and parent.kind == BlockKind.EVENT_CHOICE:
            sibling = [c.name for c in parent.children[:2] if c.name != name]
            sets += tuple((s, IDLE) for s in sibling)
        return [R(name, "T1", requires=((name, ENABLED),), update=b.update, sets=sets)]
    if kind == BlockKind.EMPTY:
        return [R(name, "T1", requires=((name, ENABLED),), sets=((name, COMPLETED),))]
    if kind in (BlockKind.PROCESS, BlockKind.SUBPROCESS):
        start = b.attr("start-update") if kind == BlockKind.PROCESS else None
        end = b.attr("end-update") if kind == BlockKind.PROCESS else None
        return [
            R(name, "T1", requires=((name, ENABLED),), update=start,
              sets=((kids[0], ENABLED), (name, WAITING))),
            R(name, "T2", requires=((kids[0], COMPLETED),), update=end,
              sets=((kids[0], IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.SEQUENCE:
        b1, b2 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((b1, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((b1, COMPLETED),), sets=((b1, IDLE), (b2, ENABLED))),
            R(name, "T3", requires=((b2, COMPLETED),), sets=((b2, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.NSEQUENCE:
        rules = [
            R(name, "T1", requires=((name, ENABLED),), sets=((kids[0], ENABLED), (name, WAITING))),
            R(name, "T2", requires=((kids[0], COMPLETED),), sets=((kids[0], IDLE), (kids[1], ENABLED))),
        ]
        for k in range(1, len(kids) - 1):
            rules.append(R(name, f"T3_{k + 1}", requires=((kids[k], COMPLETED),),
                           sets=((kids[k], IDLE), (kids[k + 1], ENABLED))))
        rules.append(R(name, "T4", requires=((kids[-1], COMPLETED),),
                       sets=((kids[-1], IDLE), (name, COMPLETED))))
        return rules
    if kind == BlockKind.PARALLEL:
        b1, b2 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((b1, ENABLED), (b2, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((b1, COMPLETED), (b2, COMPLETED)),
              sets=((b1, IDLE), (b2, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.CHOICE and b.has("incl"):
        b1, b2 = kids
        c1, c2 = b.attr("cond1"), b.attr("cond2")
        return [
            R(name, "T1", requires=((name, ENABLED),), conditions=((c1, True), (c2, False)),
              sets=((b1, ENABLED), (name, WAITING1))),
            R(name, "T2", requires=((name, ENABLED),), conditions=((c1, False), (c2, True)),
              sets=((b2, ENABLED), (name, WAITING1))),
            R(name, "T3", requires=((name, ENABLED),), conditions=((c1, True), (c2, True)),
              sets=((b1, ENABLED), (b2, ENABLED), (name, WAITING2))),
            R(name, "T4", requires=((b1, COMPLETED), (name, WAITING1)), sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T5", requires=((b2, COMPLETED), (name, WAITING1)), sets=((b2, IDLE), (name, COMPLETED))),
            R(name, "T6", requires=((b1, COMPLETED), (b2, COMPLETED), (name, WAITING2)),
              sets=((b1, IDLE), (b2, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.CHOICE:
        b1, b2 = kids
        c1 = b.attr("cond1")
        second = (b.attr("cond2"), True) if b.has("cond2") else (c1, False)
        return [
            R(name, "T1", requires=((name, ENABLED),), conditions=((c1, True),),
              sets=((b1, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((name, ENABLED),), conditions=(second,),
              sets=((b2, ENABLED), (name, WAITING))),
            R(name, "T3", requires=((b1, COMPLETED),), sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T4", requires=((b2, COMPLETED),), sets=((b2, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.DEFERRED:
        b1, b2 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((b1, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((name, ENABLED),), sets=((b2, ENABLED), (name, WAITING))),
            R(name, "T3", requires=((b1, COMPLETED),), sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T4", requires=((b2, COMPLETED),), sets=((b2, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.LOOP:
        b1, b2 = kids
        cond = b.attr("cond")
        leave = (b.attr("exit"), True) if b.has("exit") else (cond, False)
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((b1, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((b1, COMPLETED),), conditions=((cond, True),),
              sets=((b1, IDLE), (b2, ENABLED))),
            R(name, "T3", requires=((b2, COMPLETED),), sets=((b1, ENABLED), (b2, IDLE))),
            R(name, "T4", requires=((b1, COMPLETED),), conditions=(leave,),
              sets=((b1, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.EVENT_CHOICE:
        e1, e2, b1, b2 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((e1, ENABLED), (e2, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((e1, COMPLETED),), sets=((e1, IDLE), (b1, ENABLED))),
            R(name, "T3", requires=((e2, COMPLETED),), sets=((e2, IDLE), (b2, ENABLED))),
            R(name, "T4", requires=((b1, COMPLETED),), sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T5", requires=((b2, COMPLETED),), sets=((b2, IDLE), (name, COMPLETED))),
        ]
    if kind == BlockKind.COMPLETION:
        (b1,) = kids
        cond = b.attr("cond")
        other = (b.attr("alt"), True) if b.has("alt") else (cond, False)
        end = b.attr("end")
        if end == "error":
            handler = error_handler(m, b)
            effect = _protected_reset(m, handler) if handler is not None else ()
        else:
            effect = _early_completion(m, b)
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((b1, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((b1, COMPLETED),), conditions=((cond, True),),
              sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T3", requires=((b1, COMPLETED),), conditions=(other,), update=b.attr("end-update"),
              sets=_merge(((b1, IDLE),), effect)),
        ]
    if kind == BlockKind.BACKWARD:
        a, b1 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((a, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((a, COMPLETED),), sets=((a, IDLE), (name, COMPLETED))),
            R(name, "T3", requires=((a, ERROR),), sets=((a, IDLE), (b1, ENABLED))),
            R(name, "T4", requires=((b1, COMPLETED),), sets=((b1, IDLE), (a, ENABLED))),
        ] + _boundary_rules(m, b)
    if kind == BlockKind.FORWARD:
        a, b1, b2 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((a, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((a, COMPLETED),), sets=((a, IDLE), (b1, ENABLED))),
            R(name, "T3", requires=((b1, COMPLETED),), sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T4", requires=((a, ERROR),), sets=((a, IDLE), (b2, ENABLED))),
            R(name, "T5", requires=((b2, COMPLETED),), sets=((b2, IDLE), (name, COMPLETED))),
        ] + _boundary_rules(m, b)
    if kind == BlockKind.NON_INTERRUPTING:
        a, b1, b2 = kids
        return [
            R(name, "T1", requires=((name, ENABLED),), sets=((a, ENABLED), (name, WAITING))),
            R(name, "T2", requires=((a, COMPLETED),), sets=((a, IDLE), (b1, ENABLED))),
            R(name, "T3", requires=((b1, COMPLETED),), flags=((name, False),),
              sets=((b1, IDLE), (name, COMPLETED))),
            R(name, "T4", requires=((b2, IDLE),), flags=((name, True),), sets=((b2, ENABLED),)),
            R(name, "T5", requires=((b1, COMPLETED), (b2, COMPLETED)),
              sets=((b1, IDLE), (b2, IDLE), (name, COMPLETED)), set_flags=((name, False),)),
        ] + _boundary_rules(m, b)
    if kind == BlockKind.ERR_EVENT:
        handler = error_handler(m, b)
        effect = _protected_reset(m, handler) if handler is not None else ()
        return [
            R(name, "T1", requires=((name, ENABLED),), update=b.update, sets=((name, COMPLETED),)),
            R(name, "T2", requires=((name, ENABLED),), update=b.attr("error-update"),
              sets=_merge(((name, IDLE),), effect)),
        ]
    raise ValueError(f"no rules for block kind {kind}")


def _merge(first: Tuple[Tuple[str, str], ...], second: Tuple[Tuple[str, str], ...]) -> Tuple[Tuple[str, str], ...]:
    """Later assignments win; one assignment per block"""
    merged: Dict[str, str] = {}
    for block, state in first + second:
        merged[block] = state
    return tuple(merged.items())


def model_rules(m: DabModel) -> List[BlockRule]:
    return [rule for b in m.blocks() for rule in block_rules(m, b)]


def flag_blocks(m: DabModel) -> List[str]:
    """Blocks that own a per-case boolean error flag"""
    return [b.name for b in m.blocks() if b.kind == BlockKind.NON_INTERRUPTING]


def nonatomic_tasks(m: DabModel) -> List[Block]:
    return [b for b in m.blocks() if b.kind == BlockKind.TASK and not b.atomic and b.update]


def lifecycle_graph(m: DabModel, name: str) -> nx.DiGraph:
    """Lifecycle states of one block, with an edge per rule that moves it.

    A rule that sets the block without requiring its state enables it from
    idle, or resets it from any state.
    """
    graph = nx.DiGraph()
    graph.add_node(IDLE)
    for r in model_rules(m):
        required = dict(r.requires)
        for block, state in r.sets:
            if block != name:
                continue
            if block in required:
                sources = [required[block]]
            elif state == ENABLED:
                sources = [IDLE]
            else:
                sources = [s for s in LIFECYCLE_STATES if s != state]
            for source in sources:
                if graph.has_edge(source, state):
                    graph.edges[source, state]["rules"].append(r.name)
                else:
                    graph.add_edge(source, state, rules=[r.name])
    return graph


def lifecycle_closed(m: DabModel, b: Block) -> bool:
    """Every state reachable from the start state can complete; non-root blocks also return to idle"""
    graph = lifecycle_graph(m, b.name)
    root = b.name == m.root.name
    start = ENABLED if root else IDLE
    if start not in graph:
        return False
    reachable = nx.descendants(graph, start) | {start}
    if COMPLETED not in reachable:
        return False
    if root:
        return True
    return all(nx.has_path(graph, state, IDLE) for state in reachable)


__all__ = [
    "IDLE", "ENABLED", "ACTIVE", "WAITING", "WAITING1", "WAITING2", "COMPLETED", "ERROR",
    "FIRE", "ACTIVATE", "COMPLETE", "BlockRule", "condition_cubes", "block_rules", "model_rules",
    "flag_blocks", "nonatomic_tasks", "lifecycle_graph", "lifecycle_closed",
]
