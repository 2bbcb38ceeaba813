"""
Static analyses deciding which soundness and termination results apply to a model.

- characteristic graph of the catalog and its acyclicity
- separated guards and case-identifier agnosticism
- the per-update-specification termination conditions and the overall classification
- locality classes of state formulas
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from dab.logic.terms import Cube, Read, Signature, StateFormula, StateVar, Var, literal_subterms
from dab.model import (
    SELF, Atom, CondUpdate, DabModel, DataSchema, DeleteSet, Guard, InsertSet, Item, Query,
    RelationSchema, SortKind, UpdateSpec, Variable, branch_leaves, case_vars, free_vars, is_repo_free,
    item_terms, query_variables,
)

logger = logging.getLogger(__name__)

MULTISET = "multiset"
SET = "set"

CASE_BOUNDED = "case-bounded"
UNRESTRICTED = "unrestricted"
DEC_CASE_REPO_BOUNDED = "dec-case-repo-bounded"
DEC_CASE_BOUNDED = "dec-case-bounded"
DEC_CASE_UNBOUNDED = "dec-case-unbounded"

STRONGLY_LOCAL = "strongly-local"
LOCAL = "local"
NEITHER = "neither"


@dataclass(frozen=True)
class VerificationMode:
    """Case bound, repository bound and insertion semantics of a verification run"""
    case_bound: Optional[int] = None
    repo_bound: Optional[int] = None
    insertion: str = MULTISET

    def __post_init__(self):
        for name in ("case_bound", "repo_bound"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be at least 1, got {value}")
        if self.insertion not in (MULTISET, SET):
            raise ValueError(f"insertion semantics must be set or multiset, got {self.insertion}")

    def __str__(self) -> str:
        cases = self.case_bound if self.case_bound is not None else "unbounded"
        repo = self.repo_bound if self.repo_bound is not None else "unbounded"
        return f"cases={cases}, repo={repo}, insertion={self.insertion}"


# ---------------------------------------------------------------------------
# Characteristic graph
# ---------------------------------------------------------------------------

def characteristic_graph(catalog: Sequence[RelationSchema]) -> nx.DiGraph:
    """Key-to-attribute and foreign-key-to-key dependencies between catalog columns"""
    graph = nx.DiGraph()
    owners = {rel.attributes[0].sort: rel for rel in catalog if rel.attributes}
    for rel in catalog:
        graph.add_nodes_from((rel.name, a.name) for a in rel.attributes)
    for rel in catalog:
        if not rel.attributes:
            continue
        key = rel.attributes[0]
        for attr in rel.attributes[1:]:
            graph.add_edge((rel.name, key.name), (rel.name, attr.name))
            target = owners.get(attr.sort)
            if target is not None:
                graph.add_edge((rel.name, attr.name), (target.name, target.attributes[0].name))
    return graph


def is_acyclic(graph: nx.DiGraph) -> bool:
    return nx.is_directed_acyclic_graph(graph)


# ---------------------------------------------------------------------------
# Guards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    """Witness ``chi & R(y) & xi`` for one disjunct of a separated guard"""
    chi: Tuple[Item, ...]
    atom: Optional[Atom]
    xi: Tuple[Item, ...]


def _data_vars(items: Sequence[Item], cvars: frozenset) -> set:
    return {t.name for item in items for t in item_terms(item)
            if isinstance(t, Variable) and t.name not in cvars}


def _uses_case_vars(items: Sequence[Item], cvars: frozenset) -> bool:
    return any(isinstance(t, Variable) and t.name in cvars for item in items for t in item_terms(item))


def _decompose(query: Query, schema: DataSchema, cvars: frozenset) -> Optional[Decomposition]:
    repo = [item for item in query.items if isinstance(item, Atom) and schema.is_repository(item.relation)]
    if len(repo) > 1 or any(atom.negated for atom in repo):
        return None
    atom = repo[0] if repo else None
    rest = [item for item in query.items if item is not atom]
    y = {t.name for t in atom.terms if isinstance(t, Variable)} if atom else set()
    if y & cvars:
        return None
    for mask in itertools.product((True, False), repeat=len(rest)):
        chi = tuple(item for item, left in zip(rest, mask) if left)
        xi = tuple(item for item, left in zip(rest, mask) if not left)
        if _uses_case_vars(xi, cvars):
            continue
        chi_vars = _data_vars(chi, cvars)
        if chi_vars & y or chi_vars & _data_vars(xi, cvars):
            continue
        return Decomposition(chi, atom, xi)
    return None


def is_separated(guard: Guard, schema: DataSchema, self_is_constant: bool = False
                 ) -> Tuple[bool, List[Optional[Decomposition]]]:
    """Separatedness with one witness decomposition per disjunct

    Answer variables are shared by every disjunct by construction and are left
    out of the pairwise disjointness test. With ``self_is_constant`` (case-bounded
    runs) the case identifier behaves like a constant.
    """
    cvars = frozenset(schema.case_var_names())
    if self_is_constant:
        cvars = cvars - {SELF}
    witnesses = [_decompose(query, schema, cvars) for query in guard.body]
    ok = all(w is not None for w in witnesses)
    head = set(guard.head_names)
    for a, b in itertools.combinations(guard.body, 2):
        shared = (_data_vars(a.items, cvars) & _data_vars(b.items, cvars)) - head
        if shared:
            ok = False
    return ok, witnesses


def mentions_self(spec: UpdateSpec, schema: DataSchema) -> bool:
    if SELF in case_vars(spec.pre, schema):
        return True
    eff = spec.eff
    if isinstance(eff, (InsertSet, DeleteSet)):
        terms = list(eff.values or ()) + [a.term for a in eff.assignments]
        return any(isinstance(t, Variable) and t.name == SELF for t in terms)
    if isinstance(eff, CondUpdate):
        return _branch_mentions(eff.branch, SELF)
    return False


def _branch_mentions(branch, name: str) -> bool:
    if isinstance(branch, Atom):
        return any(isinstance(t, Variable) and t.name == name for t in branch.terms)
    return (any(name in query_variables(q) for q in branch.filter)
            or _branch_mentions(branch.then, name) or _branch_mentions(branch.otherwise, name))


def is_case_identifier_agnostic(m: DabModel) -> bool:
    return not any(mentions_self(spec, m.data) for spec in m.updates)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BulletCheck:
    bullet: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SpecDiagnostic:
    spec: str
    kind: str
    checks: Tuple[BulletCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass(frozen=True)
class Classification:
    sound_complete: Optional[str]
    sound_complete_reason: str
    termination: Optional[str]
    termination_reason: str
    acyclic: bool
    agnostic: bool
    diagnostics: Tuple[SpecDiagnostic, ...] = ()
    theorems: Tuple[Tuple[str, bool], ...] = field(default_factory=tuple)

    @property
    def guaranteed(self) -> bool:
        return self.termination is not None


def _branch_only_uses(branch, allowed: set) -> bool:
    for leaf in branch_leaves(branch):
        for t in leaf.terms:
            if isinstance(t, Variable) and t.name not in allowed:
                return False
    if isinstance(branch, Atom):
        return True
    filter_vars = {v for q in branch.filter for v in query_variables(q)}
    return filter_vars <= allowed and _branch_only_uses(branch.then, allowed) \
        and _branch_only_uses(branch.otherwise, allowed)


def diagnose_spec(spec: UpdateSpec, schema: DataSchema, self_is_constant: bool = False) -> SpecDiagnostic:
    """Per-bullet check of the termination conditions for one update specification"""
    kind = spec.kind
    repo_free = is_repo_free(spec.pre, schema)
    others = set(schema.case_var_names()) - {SELF}
    assigned = {a.var for a in spec.assignments}
    checks: List[BulletCheck] = []
    if kind == "insert":
        checks.append(BulletCheck("insert: precondition repo-free", repo_free,
                                  "" if repo_free else "precondition queries the repository"))
    elif kind in ("set", "delete"):
        separated, _ = is_separated(spec.pre, schema, self_is_constant)
        all_set = others <= assigned
        missing = sorted(others - assigned)
        if kind == "set" and repo_free:
            checks.append(BulletCheck("set: precondition repo-free", True))
        else:
            label = "set" if kind == "set" else "delete"
            checks.append(BulletCheck(f"{label}: precondition separated", separated,
                                      "" if separated else "precondition is not separated"))
            checks.append(BulletCheck(f"{label}: all case variables except self assigned", all_set,
                                      "" if all_set else f"not assigned: {', '.join(missing)}"))
    elif kind == "cond-update":
        boolean = not spec.pre.head
        allowed = set(spec.eff.variables) | ({SELF} if self_is_constant else set())
        only_new = _branch_only_uses(spec.eff.branch, allowed)
        checks.append(BulletCheck("update: precondition repo-free", repo_free,
                                  "" if repo_free else "precondition queries the repository"))
        checks.append(BulletCheck("update: precondition boolean", boolean,
                                  "" if boolean else f"answer variables {', '.join(spec.pre.head_names)}"))
        checks.append(BulletCheck("update: branches use only update variables and constants", only_new,
                                  "" if only_new else "branches mention other variables"))
    return SpecDiagnostic(spec.name, kind, tuple(checks))


def classify(m: DabModel, mode: VerificationMode) -> Classification:
    """Which soundness/completeness and termination results cover ``m`` under ``mode``"""
    acyclic = is_acyclic(characteristic_graph(m.data.catalog))
    agnostic = is_case_identifier_agnostic(m)
    bounded_cases = mode.case_bound is not None
    if bounded_cases:
        sound, sound_reason = CASE_BOUNDED, f"case bound {mode.case_bound}"
    elif agnostic:
        sound, sound_reason = UNRESTRICTED, "no update specification mentions self"
    else:
        users = sorted(spec.name for spec in m.updates if mentions_self(spec, m.data))
        sound, sound_reason = None, f"mentions self: {', '.join(users)}"

    diagnostics = tuple(diagnose_spec(spec, m.data, bounded_cases) for spec in m.updates)
    specs_ok = all(d.passed for d in diagnostics)
    multiset = mode.insertion == MULTISET
    repo_bounded = bounded_cases and mode.repo_bound is not None

    theorems = (
        (CASE_BOUNDED, bounded_cases),
        (UNRESTRICTED, agnostic),
        (DEC_CASE_REPO_BOUNDED, repo_bounded and acyclic),
        (DEC_CASE_BOUNDED, bounded_cases and acyclic and multiset and specs_ok),
        (DEC_CASE_UNBOUNDED, agnostic and acyclic and multiset and specs_ok),
    )
    applicable = dict(theorems)
    if applicable[DEC_CASE_REPO_BOUNDED]:
        termination, reason = DEC_CASE_REPO_BOUNDED, "case- and repo-bounded acyclic model"
    elif bounded_cases and applicable[DEC_CASE_BOUNDED]:
        termination, reason = DEC_CASE_BOUNDED, "all update specifications meet the conditions"
    elif not bounded_cases and applicable[DEC_CASE_UNBOUNDED]:
        termination, reason = DEC_CASE_UNBOUNDED, "agnostic model, all update specifications meet the conditions"
    else:
        problems = []
        if not acyclic:
            problems.append("catalog is cyclic")
        if not multiset:
            problems.append("set insertion semantics")
        if not bounded_cases and not agnostic:
            problems.append("unbounded cases with self")
        failing = [d.spec for d in diagnostics if not d.passed]
        if failing:
            problems.append(f"update specifications failing: {', '.join(failing)}")
        termination, reason = None, "; ".join(problems) or "no termination result applies"
    result = Classification(sound, sound_reason, termination, reason, acyclic, agnostic, diagnostics, theorems)
    logger.info(f"Classified model under {mode}: sound-complete={sound}, termination={termination}")
    return result


# ---------------------------------------------------------------------------
# Locality of state formulas
# ---------------------------------------------------------------------------

def _index_vars(cube: Cube, sig: Optional[Signature]) -> set:
    if sig is not None:
        return {v for v in cube.variables() if v.sort in sig.sorts and sig.sorts[v.sort].artifact}
    return {t.index for t in cube.terms() if isinstance(t, Read) and isinstance(t.index, Var)}


def cube_locality(cube: Cube, sig: Optional[Signature] = None) -> str:
    indexes = _index_vars(cube, sig)
    strong = True
    for lit in cube.literals:
        subterms = list(literal_subterms(lit))
        read_indexes = {t.index for t in subterms if isinstance(t, Read) and t.index in indexes}
        mentioned = {t for t in subterms if t in indexes}
        if len(read_indexes) > 1:
            return NEITHER
        if read_indexes and mentioned - read_indexes:
            return NEITHER
        if read_indexes and any(isinstance(t, StateVar) for t in subterms):
            strong = False
    return STRONGLY_LOCAL if strong else LOCAL


def formula_locality_class(phi: StateFormula, sig: Optional[Signature] = None) -> str:
    order = [STRONGLY_LOCAL, LOCAL, NEITHER]
    worst = STRONGLY_LOCAL
    for cube in phi:
        kind = cube_locality(cube, sig)
        if order.index(kind) > order.index(worst):
            worst = kind
    return worst


__all__ = [
    "MULTISET", "SET", "CASE_BOUNDED", "UNRESTRICTED", "DEC_CASE_REPO_BOUNDED", "DEC_CASE_BOUNDED",
    "DEC_CASE_UNBOUNDED", "STRONGLY_LOCAL", "LOCAL", "NEITHER", "VerificationMode",
    "characteristic_graph", "is_acyclic", "Decomposition", "is_separated", "mentions_self",
    "is_case_identifier_agnostic", "BulletCheck", "SpecDiagnostic", "Classification", "diagnose_spec",
    "classify", "cube_locality", "formula_locality_class",
]
