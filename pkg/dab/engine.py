"""
Backward reachability over artifact systems.

Starting from the unsafe cubes, preimages are computed breadth-first, one
proof-tree node per (parent, transition, cube). Basic-sort existentials are
eliminated after every step, nodes entailed by the current set of live nodes
are deleted, and a live node compatible with the initial state ends the search
with a counterexample trace.
"""
import itertools
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from dab.errors import CyclicSignature
from dab.logic.backends import INTERNAL, SolverBackend
from dab.logic.qe import qe_cover
from dab.logic.terms import (
    Cube, Eq, Literal, Neq, Read, StateFormula, StateVar, Term, Var, formula_str, literal_subterms,
    literal_terms, negate, subst_literal, substitute,
)
from dab.translate import ArtifactSystem, Transition, UpdateGroup

logger = logging.getLogger(__name__)

SAFE = "SAFE"
UNSAFE = "UNSAFE"
UNKNOWN = "UNKNOWN"

LIVE = "live"
DELETED = "deleted"

_PERMUTATION_LIMIT = 5


@dataclass(frozen=True)
class EngineConfig:
    max_nodes: int = 100000
    max_seconds: float = 600.0
    audit: bool = False
    backend: str = INTERNAL
    solver_command: Optional[str] = None
    timeout_ms: int = 10000
    record_obligations: bool = False


@dataclass
class ProofNode:
    id: int
    cube: Cube
    parent: Optional[int]
    transition: Optional[str]
    depth: int
    status: str = LIVE


@dataclass
class Metrics:
    nodes: int = 0
    depth: int = 0
    solver_calls: int = 0
    seconds: float = 0.0

    def lines(self) -> List[str]:
        return [f"NODES={self.nodes}", f"DEPTH={self.depth}",
                f"SOLVER_CALLS={self.solver_calls}", f"SECONDS={self.seconds:.3f}"]


@dataclass
class ReachabilityResult:
    verdict: str
    metrics: Metrics
    fixpoint: StateFormula = ()
    trace: Tuple[str, ...] = ()
    nodes: List[ProofNode] = field(default_factory=list)
    reason: str = ""
    audit_ok: Optional[bool] = None
    backend: Optional[SolverBackend] = None

    @property
    def safe(self) -> bool:
        return self.verdict == SAFE


# ---------------------------------------------------------------------------
# Preimage
# ---------------------------------------------------------------------------

def _orthogonal_negation(conds: Sequence[Literal]) -> List[List[Literal]]:
    """Mutually exclusive cubes whose disjunction is the negation of ``conds``"""
    return [list(conds[:k]) + [negate(conds[k])] for k in range(len(conds))]


def _case_options(group: UpdateGroup, index: Optional[Term]) -> List[Tuple[List[Literal], Tuple[Term, ...]]]:
    """One (conditions, values) pair per way the group can evaluate at ``index``"""
    mapping = {group.param: index} if group.param is not None else {}

    def inst(lits):
        return [subst_literal(l, mapping) for l in lits]

    options = []
    previous: List[List[List[Literal]]] = []
    for conds, values in group.cases + (((), group.default),):
        values = tuple(substitute(v, mapping) for v in values)
        for negations in itertools.product(*previous):
            lits = inst(conds) + [l for part in negations for l in inst(part)]
            options.append((lits, values))
        if not conds:
            break
        previous.append(_orthogonal_negation(conds))
    return options


def _renamed(t: Transition) -> Tuple[List[Literal], List[UpdateGroup]]:
    mapping = {p: Var(p.name + "'", p.sort) for p in t.params}
    guard = [subst_literal(l, mapping) for l in t.guard]
    groups = [UpdateGroup(g.targets, g.param,
                          tuple((tuple(subst_literal(l, mapping) for l in c), tuple(substitute(v, mapping) for v in vs))
                                for c, vs in g.cases),
                          tuple(substitute(v, mapping) for v in g.default))
              for g in t.updates]
    return guard, groups


def preimage_cube(t: Transition, cube: Cube) -> List[Cube]:
    """Cubes whose disjunction is ``exists params. guard & cube[updates]`` before elimination"""
    guard, groups = _renamed(t)
    owner: Dict[str, UpdateGroup] = {name: g for g in groups for name in g.targets}
    instances: Dict[Tuple[int, Optional[Term]], List[Term]] = {}
    order: List[Tuple[int, Optional[Term]]] = []
    for term in sorted({s for lit in cube.literals for s in literal_subterms(lit)}, key=str):
        if isinstance(term, StateVar) and term.name in owner:
            key = (id(owner[term.name]), None)
        elif isinstance(term, Read) and term.array in owner:
            key = (id(owner[term.array]), term.index)
        else:
            continue
        if key not in instances:
            instances[key] = []
            order.append(key)
        instances[key].append(term)
    by_id = {id(g): g for g in groups}
    per_instance = []
    for key in order:
        group = by_id[key[0]]
        choices = []
        for lits, values in _case_options(group, key[1]):
            mapping = {}
            for term in instances[key]:
                name = term.name if isinstance(term, StateVar) else term.array
                mapping[term] = values[group.targets.index(name)]
            choices.append((lits, mapping))
        per_instance.append(choices)
    result = []
    for picked in itertools.product(*per_instance):
        mapping: Dict[Term, Term] = {}
        extra: List[Literal] = []
        for lits, part in picked:
            extra.extend(lits)
            mapping.update(part)
        body = [subst_literal(lit, mapping) for lit in cube.literals]
        new = Cube.of(body + guard + extra)
        if new is not None:
            result.append(new)
    return result


def preimage(t: Transition, phi: StateFormula) -> StateFormula:
    return tuple(c for cube in phi for c in preimage_cube(t, cube))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

class Normalizer:
    """Elimination, pruning and canonical naming of cubes for one system"""

    def __init__(self, system: ArtifactSystem, backend: SolverBackend):
        self.system = system
        self.sig = system.signature
        self.backend = backend
        self._warned = False

    def is_index(self, v: Var) -> bool:
        info = self.sig.sorts.get(v.sort)
        return info is not None and info.artifact

    def unify_indexes(self, cube: Cube) -> Optional[Cube]:
        while True:
            for lit in cube.literals:
                if isinstance(lit, Eq) and all(isinstance(t, Var) and self.is_index(t) for t in literal_terms(lit)):
                    keep, drop = sorted(literal_terms(lit), key=lambda v: v.name)
                    cube = cube.substitute({drop: keep})
                    if cube is None:
                        return None
                    break
            else:
                return cube

    def drop_loose_indexes(self, cube: Cube) -> Cube:
        """``exists e. e != e1 & ...`` holds in any infinite index sort when e occurs nowhere else"""
        while True:
            usage: Dict[Var, bool] = {}
            for lit in cube.literals:
                plain = isinstance(lit, Neq) and all(isinstance(t, Var) for t in literal_terms(lit))
                for t in literal_subterms(lit):
                    if isinstance(t, Var) and self.is_index(t):
                        usage[t] = usage.get(t, True) and plain
            loose = [v for v, only_diseqs in usage.items() if only_diseqs]
            if not loose:
                return cube
            v = sorted(loose, key=lambda x: x.name)[0]
            cube = Cube(frozenset(l for l in cube.literals if v not in literal_terms(l)))

    def eliminate(self, cube: Cube) -> List[Cube]:
        basic = [v for v in cube.variables() if not self.is_index(v)]
        if not basic:
            return [cube]
        try:
            return qe_cover(basic, cube, self.sig)
        except CyclicSignature as e:
            if not self._warned:
                logger.warning(f"[WARN] {e}; keeping basic-sort variables in the proof tree")
                self._warned = True
            return [cube]

    def canonical(self, cube: Cube) -> Cube:
        variables = sorted(cube.variables(), key=lambda v: (v.sort, v.name))
        indexes = [v for v in variables if self.is_index(v)]
        basics = [v for v in variables if not self.is_index(v)]

        def rename(idx_order, basic_order) -> Tuple[Tuple[str, ...], Dict[Term, Term]]:
            mapping: Dict[Term, Term] = {}
            for n, v in enumerate(idx_order, start=1):
                mapping[v] = Var(f"e{n}", v.sort)
            for n, v in enumerate(basic_order, start=1):
                mapping[v] = Var(f"y{n}", v.sort)
            key = tuple(sorted(str(subst_literal(l, mapping)) for l in cube.literals))
            return key, mapping

        if len(indexes) <= _PERMUTATION_LIMIT and len(basics) <= 3:
            best = min((rename(i, b) for i in itertools.permutations(indexes)
                        for b in itertools.permutations(basics)), key=lambda kv: kv[0])
        else:
            best = rename(indexes, basics)
        return Cube(frozenset(subst_literal(l, best[1]) for l in cube.literals))

    def normalize(self, cubes: Iterable[Cube]) -> List[Cube]:
        result: List[Cube] = []
        for raw in cubes:
            cube = self.unify_indexes(raw)
            if cube is None:
                continue
            for eliminated in self.eliminate(cube):
                eliminated = self.unify_indexes(eliminated)
                if eliminated is None:
                    continue
                eliminated = self.drop_loose_indexes(eliminated)
                if not self.backend.is_sat(eliminated):
                    continue
                canon = self.canonical(eliminated)
                if canon not in result:
                    result.append(canon)
        return result


def normalize(system: ArtifactSystem, phi: Iterable[Cube], backend: Optional[SolverBackend] = None) -> StateFormula:
    backend = backend or SolverBackend(system.signature)
    return tuple(Normalizer(system, backend).normalize(phi))


def initial_cube(system: ArtifactSystem, cube: Cube) -> Optional[Cube]:
    """``cube`` evaluated on the initial state, leaving only the quantified variables"""
    terms = [t for lit in cube.literals for t in literal_subterms(lit)]
    return cube.substitute(system.initial_substitution(terms))


def intersects_initial(system: ArtifactSystem, cube: Cube, backend: SolverBackend) -> bool:
    start = initial_cube(system, cube)
    return start is not None and backend.is_sat(start)


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

class _Search:
    def __init__(self, system: ArtifactSystem, cfg: EngineConfig):
        self.system = system
        self.cfg = cfg
        self.backend = SolverBackend(system.signature, cfg.backend, cfg.solver_command, cfg.timeout_ms,
                                     record=cfg.record_obligations)
        self.normalizer = Normalizer(system, self.backend)
        self.nodes: List[ProofNode] = []
        self.start = time.monotonic()

    def live(self) -> List[ProofNode]:
        return [n for n in self.nodes if n.status == LIVE]

    def metrics(self) -> Metrics:
        depth = max((n.depth for n in self.nodes), default=0)
        return Metrics(len(self.nodes), depth, self.backend.calls, time.monotonic() - self.start)

    def trace(self, node: ProofNode) -> Tuple[str, ...]:
        labels = []
        current: Optional[ProofNode] = node
        while current is not None and current.transition is not None:
            labels.append(current.transition)
            current = self.nodes[current.parent] if current.parent is not None else None
        return tuple(labels)

    def add(self, cube: Cube, parent: Optional[ProofNode], transition: Optional[str]) -> Optional[ProofNode]:
        """Create a node; returns it when it stays live"""
        depth = parent.depth + 1 if parent is not None else 0
        node = ProofNode(len(self.nodes), cube, parent.id if parent else None, transition, depth)
        live = [n.cube for n in self.live()]
        self.nodes.append(node)
        if any(other.literals <= cube.literals for other in live):
            node.status = DELETED
            return None
        if live and self.backend.entails_cube(cube, live):
            node.status = DELETED
            return None
        for other in self.live():
            if other is node or not cube.reads() <= other.cube.reads():
                continue
            if cube.literals <= other.cube.literals or self.backend.entails_cube(other.cube, [cube]):
                other.status = DELETED
        return node

    def over_limits(self) -> Optional[str]:
        if len(self.nodes) >= self.cfg.max_nodes:
            return f"node cap {self.cfg.max_nodes} reached"
        if time.monotonic() - self.start > self.cfg.max_seconds:
            return f"time cap {self.cfg.max_seconds:.0f} s reached"
        return None

    def result(self, verdict: str, **kwargs) -> ReachabilityResult:
        return ReachabilityResult(verdict, self.metrics(), nodes=self.nodes, backend=self.backend, **kwargs)

    def stopped(self, limit: str) -> ReachabilityResult:
        logger.warning(f"[WARN] Search stopped: {limit}")
        return self.result(UNKNOWN, reason=limit)

    def run(self, unsafe: StateFormula) -> ReachabilityResult:
        frontier = deque()
        for cube in self.normalizer.normalize(unsafe):
            node = self.add(cube, None, None)
            if node is None:
                continue
            if intersects_initial(self.system, cube, self.backend):
                return self.result(UNSAFE, trace=())
            frontier.append(node)
        level = 0
        while frontier:
            level_size = len(frontier)
            logger.info(f"Level {level}: {level_size} frontier node(s), {len(self.nodes)} created")
            next_frontier = deque()
            while frontier:
                node = frontier.popleft()
                if node.status != LIVE:
                    continue
                logger.debug(f"Expanding node {node.id} (depth {node.depth}): {node.cube}")
                reads = node.cube.reads()
                for t in self.system.transitions:
                    if not t.writes & reads:
                        continue
                    limit = self.over_limits()
                    if limit is not None:
                        return self.stopped(limit)
                    for cube in self.normalizer.normalize(preimage_cube(t, node.cube)):
                        limit = self.over_limits()
                        if limit is not None:
                            return self.stopped(limit)
                        child = self.add(cube, node, t.name)
                        if child is None:
                            continue
                        if intersects_initial(self.system, cube, self.backend):
                            return self.result(UNSAFE, trace=self.trace(child))
                        next_frontier.append(child)
            frontier = next_frontier
            level += 1
        fixpoint = tuple(n.cube for n in self.live())
        return self.result(SAFE, fixpoint=fixpoint)


def backward_reachability(system: ArtifactSystem, unsafe: StateFormula,
                          cfg: Optional[EngineConfig] = None) -> ReachabilityResult:
    """Breadth-first backward search from ``unsafe``; SAFE, UNSAFE with a trace, or UNKNOWN at a cap"""
    cfg = cfg or EngineConfig()
    search = _Search(system, cfg)
    result = search.run(unsafe)
    if result.verdict == SAFE and cfg.audit:
        result.audit_ok = audit_fixpoint(system, result.fixpoint, search.backend)
        result.metrics = search.metrics()
    if result.verdict == UNSAFE:
        logger.info(f"✅ UNSAFE after {result.metrics.nodes} nodes; trace: {' -> '.join(result.trace) or '(initial)'}")
    else:
        logger.info(f"✅ {result.verdict} after {result.metrics.nodes} nodes, depth {result.metrics.depth}")
    return result


def audit_fixpoint(system: ArtifactSystem, fixpoint: StateFormula, backend: SolverBackend) -> bool:
    """Every preimage of the fixpoint is entailed by it and the fixpoint misses the initial state"""
    normalizer = Normalizer(system, backend)
    for cube in fixpoint:
        if intersects_initial(system, cube, backend):
            logger.error(f"❌ Fixpoint cube intersects the initial state: {cube}")
            return False
        for t in system.transitions:
            for pre in normalizer.normalize(preimage_cube(t, cube)):
                if not backend.entails_cube(pre, fixpoint):
                    logger.error(f"❌ Preimage under {t.name} escapes the fixpoint: {pre}")
                    return False
    return True


def dump_tree(result: ReachabilityResult) -> str:
    lines = ["# id parent transition depth status formula"]
    for n in result.nodes:
        parent = "-" if n.parent is None else str(n.parent)
        lines.append(f"{n.id} {parent} {n.transition or '-'} {n.depth} {n.status} {n.cube}")
    return "\n".join(lines) + "\n"


def render_fixpoint(result: ReachabilityResult) -> str:
    return formula_str(result.fixpoint)


__all__ = [
    "SAFE", "UNSAFE", "UNKNOWN", "LIVE", "DELETED", "EngineConfig", "ProofNode", "Metrics",
    "ReachabilityResult", "preimage_cube", "preimage", "Normalizer", "normalize", "initial_cube",
    "intersects_initial", "backward_reachability", "audit_fixpoint", "dump_tree", "render_fixpoint",
]
