"""
Domain types and well-formedness validation for DAB models.

This module contains:
- Sorts, relation schemas and the data schema (catalog, repository, case variables)
- The condition / query / guard language and update specifications
- The block tree of the process schema and properties over cases
- Validation of schemas, models and properties (violations are data, never exceptions)
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)


UNDEF = "undef"
SELF = "self"
BOOL = "Bool"

LIFECYCLE_STATES = (
    "idle", "enabled", "active", "waiting", "waiting1", "waiting2", "completed", "error",
)


class SortKind(str, Enum):
    """Kinds of sorts in a data schema"""
    ID = "id"
    VALUE = "value"
    CASE = "case"


class Placement(str, Enum):
    CATALOG = "catalog"
    REPOSITORY = "repository"


@dataclass(frozen=True)
class Sort:
    """A sort; ``carrier`` is set for closed value sorts with a finite domain"""
    name: str
    kind: SortKind
    carrier: Optional[Tuple[str, ...]] = None

    @property
    def closed(self) -> bool:
        return self.carrier is not None

    @property
    def numeric(self) -> bool:
        return self.closed and all(_is_int(value) for value in self.carrier)


BOOL_SORT = Sort(BOOL, SortKind.VALUE, ("true", "false"))


@dataclass(frozen=True)
class Attribute:
    name: str
    sort: str


@dataclass(frozen=True)
class RelationSchema:
    """Relation schema; catalog relations are keyed by their first attribute"""
    name: str
    attributes: Tuple[Attribute, ...]
    placement: Placement
    key: Optional[Tuple[str, ...]] = None

    @property
    def arity(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def sorts(self) -> Tuple[str, ...]:
        return tuple(a.sort for a in self.attributes)

    def position(self, attribute: str) -> int:
        return self.attribute_names.index(attribute)

    def key_positions(self) -> Tuple[int, ...]:
        """Positions of the set-insertion key K (all attributes when undeclared)"""
        if not self.key:
            return tuple(range(self.arity))
        return tuple(self.position(name) for name in self.key)


@dataclass(frozen=True)
class CaseVar:
    name: str
    sort: str


@dataclass(frozen=True)
class DataSchema:
    """Catalog, repository, case variables and the sort/constant universe"""
    sorts: Tuple[Sort, ...]
    constants: Tuple[Tuple[str, str], ...] = ()
    catalog: Tuple[RelationSchema, ...] = ()
    repository: Tuple[RelationSchema, ...] = ()
    case_vars: Tuple[CaseVar, ...] = ()

    def all_sorts(self) -> Tuple[Sort, ...]:
        if any(s.name == BOOL for s in self.sorts):
            return self.sorts
        return self.sorts + (BOOL_SORT,)

    def sort(self, name: str) -> Optional[Sort]:
        for s in self.all_sorts():
            if s.name == name:
                return s
        return None

    @property
    def ctype(self) -> Optional[str]:
        for s in self.sorts:
            if s.kind == SortKind.CASE:
                return s.name
        return None

    def relation(self, name: str) -> Optional[RelationSchema]:
        for rel in self.catalog + self.repository:
            if rel.name == name:
                return rel
        return None

    def is_catalog(self, name: str) -> bool:
        return any(rel.name == name for rel in self.catalog)

    def is_repository(self, name: str) -> bool:
        return any(rel.name == name for rel in self.repository)

    def case_var(self, name: str) -> Optional[CaseVar]:
        for var in self.case_vars:
            if var.name == name:
                return var
        return None

    def case_var_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.case_vars)

    def key_sorts(self) -> Dict[str, str]:
        """Map from key sort to the catalog relation it identifies"""
        return {rel.attributes[0].sort: rel.name for rel in self.catalog if rel.attributes}

    def constants_of(self, sort: str) -> Tuple[str, ...]:
        s = self.sort(sort)
        declared = tuple(name for name, s_name in self.constants if s_name == sort)
        if s is not None and s.carrier is not None:
            return tuple(dict.fromkeys(s.carrier + declared))
        return declared

    def sorts_of_constant(self, name: str) -> Tuple[str, ...]:
        return tuple(s.name for s in self.all_sorts() if name in self.constants_of(s.name))


# ---------------------------------------------------------------------------
# Terms, conditions, queries, guards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    value: str

    def __str__(self) -> str:
        return self.value


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Not:
    body: "Condition"


@dataclass(frozen=True)
class And:
    left: "Condition"
    right: "Condition"


@dataclass(frozen=True)
class OneOf:
    """Finite disjunction of equalities ``t = c1 or ... or t = cn``; comparisons desugar to it"""
    term: Term
    values: frozenset


@dataclass(frozen=True)
class TrueCond:
    pass


@dataclass(frozen=True)
class LifecycleIs:
    """Lifecycle atom ``B = state``, only legal inside properties"""
    block: str
    state: str


Condition = Union[Eq, Not, And, OneOf, TrueCond, LifecycleIs]


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: Tuple[Term, ...]
    negated: bool = False


Item = Union[Atom, Eq, Not, And, OneOf, TrueCond, LifecycleIs]


@dataclass(frozen=True)
class Query:
    """Conjunctive query with filters"""
    items: Tuple[Item, ...]


@dataclass(frozen=True)
class HeadVar:
    name: str
    sort: Optional[str] = None


@dataclass(frozen=True)
class Guard:
    name: str
    head: Tuple[HeadVar, ...]
    body: Tuple[Query, ...]

    @property
    def head_names(self) -> Tuple[str, ...]:
        return tuple(h.name for h in self.head)


TRUE_GUARD = Guard("", (), (Query((TrueCond(),)),))


# ---------------------------------------------------------------------------
# Effects and update specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    var: str
    term: Term


@dataclass(frozen=True)
class InsertSet:
    """INSERT ū INTO R AND SET ...; a pure SET has no tuple"""
    values: Optional[Tuple[Term, ...]]
    relation: Optional[str]
    assignments: Tuple[Assignment, ...] = ()


@dataclass(frozen=True)
class DeleteSet:
    values: Tuple[Term, ...]
    relation: str
    assignments: Tuple[Assignment, ...] = ()


@dataclass(frozen=True)
class CondBranch:
    """IF filter THEN branch ELSE branch; leaves are positive atoms over the updated relation"""
    filter: Tuple[Query, ...]
    then: Union[Atom, "CondBranch"]
    otherwise: Union[Atom, "CondBranch"]


@dataclass(frozen=True)
class CondUpdate:
    relation: str
    variables: Tuple[str, ...]
    branch: CondBranch


Effect = Union[InsertSet, DeleteSet, CondUpdate]


@dataclass(frozen=True)
class UpdateSpec:
    name: str
    pre: Guard
    eff: Optional[Effect] = None

    @property
    def kind(self) -> str:
        if self.eff is None:
            return "noop"
        if isinstance(self.eff, CondUpdate):
            return "cond-update"
        if isinstance(self.eff, DeleteSet):
            return "delete"
        return "insert" if self.eff.values is not None else "set"

    @property
    def assignments(self) -> Tuple[Assignment, ...]:
        if isinstance(self.eff, (InsertSet, DeleteSet)):
            return self.eff.assignments
        return ()


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------

class BlockKind(str, Enum):
    EMPTY = "empty"
    TASK = "task"
    EVENT = "catch-event"
    PROCESS = "process"
    SUBPROCESS = "subprocess"
    SEQUENCE = "sequence"
    NSEQUENCE = "n-sequence"
    COMPLETION = "possible-completion"
    DEFERRED = "deferred-choice"
    PARALLEL = "parallel"
    CHOICE = "choice"
    LOOP = "loop"
    EVENT_CHOICE = "event-driven-choice"
    BACKWARD = "backward-exception"
    FORWARD = "forward-exception"
    NON_INTERRUPTING = "non-interrupting-exception"
    ERR_EVENT = "err-and-event"


AttrValue = Union[str, bool, Condition]

EXCEPTION_KINDS = (BlockKind.BACKWARD, BlockKind.FORWARD, BlockKind.NON_INTERRUPTING)


@dataclass(frozen=True)
class Block:
    kind: BlockKind
    name: str
    attributes: Tuple[Tuple[str, AttrValue], ...] = ()
    children: Tuple["Block", ...] = ()

    def attr(self, name: str, default: AttrValue = None) -> AttrValue:
        for key, value in self.attributes:
            if key == name:
                return value
        return default

    def has(self, name: str) -> bool:
        return any(key == name for key, _ in self.attributes)

    @property
    def atomic(self) -> bool:
        return not self.has("nonatomic")

    @property
    def update(self) -> Optional[str]:
        return self.attr("update")

    def walk(self) -> Iterator["Block"]:
        """Pre-order traversal"""
        yield self
        for child in self.children:
            yield from child.walk()

    def descendants(self) -> List["Block"]:
        return [b for child in self.children for b in child.walk()]


# attribute name -> allowed values (None = free identifier, "cond" = condition, "flag")
_ATTRIBUTE_TABLE: Dict[BlockKind, Dict[str, object]] = {
    BlockKind.EMPTY: {},
    BlockKind.TASK: {"atomic": "flag", "nonatomic": "flag", "update": None},
    BlockKind.EVENT: {"type": ("msg", "timer", "none"), "update": None},
    BlockKind.PROCESS: {"start": ("msg", "timer", "none"), "start-update": None,
                        "end": ("msg", "none"), "end-update": None},
    BlockKind.SUBPROCESS: {},
    BlockKind.SEQUENCE: {},
    BlockKind.NSEQUENCE: {},
    BlockKind.COMPLETION: {"cond": "cond", "alt": "cond", "end": ("error", "msg", "none"),
                           "label": None, "end-update": None},
    BlockKind.DEFERRED: {},
    BlockKind.PARALLEL: {},
    BlockKind.CHOICE: {"excl": "flag", "incl": "flag", "cond1": "cond", "cond2": "cond"},
    BlockKind.LOOP: {"cond": "cond", "exit": "cond"},
    BlockKind.EVENT_CHOICE: {},
    BlockKind.BACKWARD: {"boundary": ("error", "msg", "timer"), "label": None},
    BlockKind.FORWARD: {"boundary": ("error", "msg", "timer"), "label": None},
    BlockKind.NON_INTERRUPTING: {"boundary": ("msg", "timer")},
    BlockKind.ERR_EVENT: {"type": ("msg", "timer", "none"), "update": None,
                          "error-type": ("msg", "timer", "none"), "error-update": None,
                          "label": None},
}

# kind -> (min children, max children)
_CHILD_COUNT: Dict[BlockKind, Tuple[int, Optional[int]]] = {
    BlockKind.EMPTY: (0, 0),
    BlockKind.TASK: (0, 0),
    BlockKind.EVENT: (0, 0),
    BlockKind.PROCESS: (1, 1),
    BlockKind.SUBPROCESS: (1, 1),
    BlockKind.SEQUENCE: (2, 2),
    BlockKind.NSEQUENCE: (3, None),
    BlockKind.COMPLETION: (1, 1),
    BlockKind.DEFERRED: (2, 2),
    BlockKind.PARALLEL: (2, 2),
    BlockKind.CHOICE: (2, 2),
    BlockKind.LOOP: (2, 2),
    BlockKind.EVENT_CHOICE: (4, 4),
    BlockKind.BACKWARD: (2, 2),
    BlockKind.FORWARD: (3, 3),
    BlockKind.NON_INTERRUPTING: (3, 3),
    BlockKind.ERR_EVENT: (0, 0),
}


@dataclass(frozen=True)
class Property:
    """Property over n cases: one guard body (disjunction of queries) per index"""
    indexes: Tuple[str, ...]
    guards: Tuple[Tuple[Query, ...], ...]

    def items(self) -> Iterator[Tuple[str, Tuple[Query, ...]]]:
        return iter(zip(self.indexes, self.guards))


@dataclass(frozen=True)
class Fact:
    relation: str
    values: Tuple[str, ...]


@dataclass(frozen=True)
class DabModel:
    data: DataSchema
    updates: Tuple[UpdateSpec, ...]
    root: Block

    def blocks(self) -> List[Block]:
        return list(self.root.walk())

    def block(self, name: str) -> Optional[Block]:
        for b in self.root.walk():
            if b.name == name:
                return b
        return None

    def update(self, name: Optional[str]) -> Optional[UpdateSpec]:
        if name is None:
            return None
        for spec in self.updates:
            if spec.name == name:
                return spec
        return None

    def parents(self) -> Dict[str, Block]:
        result: Dict[str, Block] = {}
        for b in self.root.walk():
            for child in b.children:
                result[child.name] = b
        return result

    def ancestors(self, name: str) -> List[Block]:
        """Enclosing blocks, innermost first"""
        parents = self.parents()
        chain = []
        while name in parents:
            parent = parents[name]
            chain.append(parent)
            name = parent.name
        return chain


# ---------------------------------------------------------------------------
# Validation report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity.upper()} {self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(v.severity == "error" for v in self.violations)

    @property
    def errors(self) -> Tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == "error")

    @property
    def warnings(self) -> Tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == "warning")

    def codes(self) -> List[str]:
        return sorted(v.code for v in self.violations)

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.violations + other.violations)


def _report(violations: Iterable[Violation]) -> ValidationReport:
    # Sorted so that permuting declarations yields the same report
    return ValidationReport(tuple(sorted(violations, key=lambda v: (v.code, v.message))))


def _is_int(text: str) -> bool:
    return text.lstrip("-").isdigit()


# ---------------------------------------------------------------------------
# Syntactic helpers over queries and guards
# ---------------------------------------------------------------------------

def condition_terms(cond: Condition) -> Iterator[Term]:
    if isinstance(cond, Eq):
        yield cond.left
        yield cond.right
    elif isinstance(cond, Not):
        yield from condition_terms(cond.body)
    elif isinstance(cond, And):
        yield from condition_terms(cond.left)
        yield from condition_terms(cond.right)
    elif isinstance(cond, OneOf):
        yield cond.term


def item_terms(item: Item) -> Iterator[Term]:
    if isinstance(item, Atom):
        yield from item.terms
    else:
        yield from condition_terms(item)


def query_variables(q: Query) -> List[str]:
    """All variable names in order of first occurrence (case variables included)"""
    seen: Dict[str, None] = {}
    for item in q.items:
        for term in item_terms(item):
            if isinstance(term, Variable):
                seen.setdefault(term.name, None)
    return list(seen)


def _queries(q: Union[Query, Guard, Tuple[Query, ...]]) -> Tuple[Query, ...]:
    if isinstance(q, Guard):
        return q.body
    if isinstance(q, Query):
        return (q,)
    return tuple(q)


def free_vars(q: Union[Query, Guard, Tuple[Query, ...]], schema: DataSchema) -> frozenset:
    """Variables of a query or guard that are not case variables"""
    cvars = set(schema.case_var_names())
    return frozenset(v for query in _queries(q) for v in query_variables(query) if v not in cvars)


def case_vars(q: Union[Query, Guard, Tuple[Query, ...]], schema: DataSchema) -> frozenset:
    """Case variables syntactically occurring in a query or guard"""
    cvars = set(schema.case_var_names())
    return frozenset(v for query in _queries(q) for v in query_variables(query) if v in cvars)


def is_repo_free(g: Union[Guard, Tuple[Query, ...]], schema: DataSchema) -> bool:
    return not any(
        isinstance(item, Atom) and schema.is_repository(item.relation)
        for query in _queries(g) for item in query.items
    )


def is_cubical(cond: Condition) -> bool:
    if isinstance(cond, Not):
        return isinstance(cond.body, (Eq, OneOf, LifecycleIs))
    if isinstance(cond, And):
        return is_cubical(cond.left) and is_cubical(cond.right)
    return True


def effect_terms(eff: Optional[Effect]) -> Iterator[Term]:
    if isinstance(eff, (InsertSet, DeleteSet)):
        for term in eff.values or ():
            yield term
        for assignment in eff.assignments:
            yield assignment.term
    elif isinstance(eff, CondUpdate):
        yield from _branch_terms(eff.branch)


def _branch_terms(branch: Union[Atom, CondBranch]) -> Iterator[Term]:
    if isinstance(branch, Atom):
        yield from branch.terms
        return
    for q in branch.filter:
        for item in q.items:
            yield from item_terms(item)
    yield from _branch_terms(branch.then)
    yield from _branch_terms(branch.otherwise)


def branch_leaves(branch: Union[Atom, CondBranch]) -> List[Atom]:
    if isinstance(branch, Atom):
        return [branch]
    return branch_leaves(branch.then) + branch_leaves(branch.otherwise)


# ---------------------------------------------------------------------------
# Typing
# ---------------------------------------------------------------------------

class TypeEnv:
    """Sort inference for the variables of one query (plus the case variables)"""

    def __init__(self, schema: DataSchema, sorts: Optional[Dict[str, str]] = None):
        self.schema = schema
        self.sorts: Dict[str, str] = {v.name: v.sort for v in schema.case_vars}
        if sorts:
            self.sorts.update(sorts)
        self.problems: List[str] = []

    def copy(self) -> "TypeEnv":
        env = TypeEnv(self.schema)
        env.sorts = dict(self.sorts)
        return env

    def term_sort(self, term: Term, expected: Optional[str] = None) -> Optional[str]:
        if isinstance(term, Variable):
            return self.sorts.get(term.name)
        if expected is not None:
            return expected
        candidates = self.schema.sorts_of_constant(term.value)
        return candidates[0] if len(candidates) == 1 else None

    def _bind(self, term: Term, sort: Optional[str]) -> bool:
        if sort is None or not isinstance(term, Variable) or term.name in self.sorts:
            return False
        self.sorts[term.name] = sort
        return True

    def infer(self, items: Iterable[Item]) -> "TypeEnv":
        items = list(items)
        changed = True
        while changed:
            changed = False
            for item in items:
                changed |= self._infer_item(item)
        return self

    def _infer_item(self, item: Item) -> bool:
        changed = False
        if isinstance(item, Atom):
            rel = self.schema.relation(item.relation)
            if rel is not None and rel.arity == len(item.terms):
                for term, attr in zip(item.terms, rel.attributes):
                    changed |= self._bind(term, attr.sort)
        elif isinstance(item, Eq):
            changed |= self._bind(item.left, self.term_sort(item.right))
            changed |= self._bind(item.right, self.term_sort(item.left))
        elif isinstance(item, Not):
            changed |= self._infer_item(item.body)
        elif isinstance(item, And):
            changed |= self._infer_item(item.left)
            changed |= self._infer_item(item.right)
        elif isinstance(item, OneOf):
            if isinstance(item.term, Variable) and item.term.name not in self.sorts:
                candidates = [s.name for s in self.schema.all_sorts()
                              if set(item.values) <= set(self.schema.constants_of(s.name))]
                if len(candidates) == 1:
                    changed |= self._bind(item.term, candidates[0])
        return changed

    def check_term(self, term: Term, sort: str, where: str) -> None:
        if isinstance(term, Variable):
            actual = self.sorts.get(term.name)
            if actual is None:
                self.problems.append(f"{where}: cannot infer the sort of '{term.name}'")
            elif actual != sort:
                self.problems.append(f"{where}: '{term.name}' has sort {actual}, expected {sort}")
        elif term.value != UNDEF and term.value not in self.schema.constants_of(sort):
            self.problems.append(f"{where}: constant '{term.value}' is not of sort {sort}")

    def check_item(self, item: Item, where: str) -> None:
        if isinstance(item, Atom):
            rel = self.schema.relation(item.relation)
            if rel is None:
                self.problems.append(f"{where}: unknown relation '{item.relation}'")
                return
            if rel.arity != len(item.terms):
                self.problems.append(
                    f"{where}: {item.relation} expects {rel.arity} terms, got {len(item.terms)}")
                return
            for term, attr in zip(item.terms, rel.attributes):
                self.check_term(term, attr.sort, where)
        elif isinstance(item, Eq):
            sort = self.term_sort(item.left) or self.term_sort(item.right)
            if sort is None:
                self.problems.append(f"{where}: cannot infer the sort of {item.left} = {item.right}")
                return
            self.check_term(item.left, sort, where)
            self.check_term(item.right, sort, where)
        elif isinstance(item, Not):
            self.check_item(item.body, where)
        elif isinstance(item, And):
            self.check_item(item.left, where)
            self.check_item(item.right, where)
        elif isinstance(item, OneOf):
            sort = self.term_sort(item.term)
            if sort is None:
                self.problems.append(f"{where}: cannot infer the sort of {item.term}")
                return
            self.check_term(item.term, sort, where)
            unknown = set(item.values) - set(self.schema.constants_of(sort))
            if unknown:
                self.problems.append(f"{where}: values {sorted(unknown)} are not constants of {sort}")


def guard_env(guard: Guard, query: Query, schema: DataSchema) -> TypeEnv:
    annotations = {h.name: h.sort for h in guard.head if h.sort}
    return TypeEnv(schema, annotations).infer(query.items)


def update_env(spec: UpdateSpec, query: Query, schema: DataSchema) -> TypeEnv:
    """Sort environment for one disjunct of ``spec.pre`` extended with the effect's variables"""
    env = guard_env(spec.pre, query, schema)
    eff = spec.eff
    if isinstance(eff, (InsertSet, DeleteSet)):
        rel = schema.relation(eff.relation) if eff.relation else None
        if rel is not None and eff.values is not None and rel.arity == len(eff.values):
            for term, attr in zip(eff.values, rel.attributes):
                env._bind(term, attr.sort)
        for assignment in eff.assignments:
            var = schema.case_var(assignment.var)
            if var is not None:
                env._bind(assignment.term, var.sort)
    elif isinstance(eff, CondUpdate):
        rel = schema.relation(eff.relation)
        if rel is not None and rel.arity == len(eff.variables):
            for name, attr in zip(eff.variables, rel.attributes):
                env.sorts[name] = attr.sort
    return env


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_data_schema(schema: DataSchema) -> ValidationReport:
    """Check the catalog / data-component definition bullets"""
    problems: List[Violation] = []
    sort_names = [s.name for s in schema.sorts]
    for name, count in Counter(sort_names).items():
        if count > 1:
            problems.append(Violation("DuplicateSort", f"sort {name} declared {count} times"))

    case_sorts = [s.name for s in schema.sorts if s.kind == SortKind.CASE]
    if len(case_sorts) != 1:
        problems.append(Violation(
            "CaseSortCount", f"exactly one case sort required, found {len(case_sorts)}"))
    ctype = schema.ctype

    def known(sort: str) -> bool:
        return schema.sort(sort) is not None

    rel_names = [r.name for r in schema.catalog + schema.repository]
    for name, count in Counter(rel_names).items():
        if count > 1:
            problems.append(Violation("DuplicateRelation", f"relation {name} declared {count} times"))

    key_owner: Dict[str, List[str]] = {}
    for rel in schema.catalog:
        if not rel.attributes:
            problems.append(Violation("EmptyRelation", f"{rel.name} has no attributes"))
            continue
        for attr in rel.attributes:
            if not known(attr.sort):
                problems.append(Violation("UnknownSort", f"{rel.name}.{attr.name}: unknown sort {attr.sort}"))
        key_sort = schema.sort(rel.attributes[0].sort)
        if key_sort is not None and key_sort.kind != SortKind.ID:
            problems.append(Violation(
                "CatalogKeyNotIdSort",
                f"{rel.name}: first attribute {rel.attributes[0].name} must have an id sort"))
        key_owner.setdefault(rel.attributes[0].sort, []).append(rel.name)
        if ctype is not None and any(a.sort == ctype for a in rel.attributes):
            problems.append(Violation(
                "CaseSortInCatalog", f"{rel.name}: the case sort {ctype} cannot be used in the catalog"))

    for sort, owners in key_owner.items():
        if len(owners) > 1:
            problems.append(Violation(
                "AmbiguousPrimaryKey", f"sort {sort} is the key of {', '.join(sorted(owners))}"))

    key_sorts = set(key_owner)
    for rel in schema.catalog:
        for attr in rel.attributes[1:]:
            s = schema.sort(attr.sort)
            if s is not None and s.kind == SortKind.ID and attr.sort not in key_sorts:
                problems.append(Violation(
                    "DanglingForeignKey",
                    f"{rel.name}.{attr.name}: id sort {attr.sort} is not the key of any catalog relation"))

    for rel in schema.repository:
        if not rel.attributes:
            problems.append(Violation("EmptyRelation", f"{rel.name} has no attributes"))
        for attr in rel.attributes:
            s = schema.sort(attr.sort)
            if s is None:
                problems.append(Violation("UnknownSort", f"{rel.name}.{attr.name}: unknown sort {attr.sort}"))
            elif s.kind in (SortKind.ID, SortKind.CASE) and attr.sort not in key_sorts and attr.sort != ctype:
                problems.append(Violation(
                    "MissingReferenceTarget",
                    f"{rel.name}.{attr.name}: id sort {attr.sort} references neither a catalog relation nor the case sort"))
        for name in rel.key or ():
            if name not in rel.attribute_names:
                problems.append(Violation("UnknownKeyAttribute", f"{rel.name}: key attribute {name} not declared"))

    var_names = [v.name for v in schema.case_vars]
    for name, count in Counter(var_names).items():
        if count > 1:
            problems.append(Violation("DuplicateCaseVar", f"case variable {name} declared {count} times"))
    self_var = schema.case_var(SELF)
    if self_var is None:
        problems.append(Violation("MissingSelf", "the case variable self is not declared"))
    elif ctype is not None and self_var.sort != ctype:
        problems.append(Violation("SelfWrongSort", f"self must have the case sort {ctype}, not {self_var.sort}"))
    for var in schema.case_vars:
        s = schema.sort(var.sort)
        if s is None:
            problems.append(Violation("UnknownSort", f"case variable {var.name}: unknown sort {var.sort}"))
        elif s.kind in (SortKind.ID, SortKind.CASE) and var.sort not in key_sorts and var.sort != ctype:
            problems.append(Violation(
                "CaseVarNotReference",
                f"case variable {var.name}: id sort {var.sort} is neither a catalog key sort nor the case sort"))

    for name, sort in schema.constants:
        s = schema.sort(sort)
        if s is None:
            problems.append(Violation("UnknownSort", f"constant {name}: unknown sort {sort}"))
        elif name == UNDEF:
            problems.append(Violation("ReservedConstant", "undef is implicit and cannot be declared"))
    return _report(problems)


def _check_query(query: Query, env: TypeEnv, schema: DataSchema, where: str,
                 problems: List[Violation], allow_lifecycle: bool = False) -> None:
    for item in query.items:
        if isinstance(item, LifecycleIs) and not allow_lifecycle:
            problems.append(Violation("LifecycleOutsideProperty", f"{where}: lifecycle atoms only allowed in properties"))
        if isinstance(item, (Not, And)) and not is_cubical(item):
            problems.append(Violation("NonCubicalCondition", f"{where}: filters must be cubical"))
        if isinstance(item, Atom) and schema.relation(item.relation) is None:
            problems.append(Violation("UnknownRelation", f"{where}: unknown relation {item.relation}"))
            continue
        if isinstance(item, Atom) and len(item.terms) != schema.relation(item.relation).arity:
            problems.append(Violation(
                "ArityMismatch", f"{where}: {item.relation} expects {schema.relation(item.relation).arity} terms"))
            continue
        env.check_item(_without_lifecycle(item), where)


def _without_lifecycle(item: Item) -> Item:
    if isinstance(item, LifecycleIs):
        return TrueCond()
    if isinstance(item, Not) and isinstance(item.body, LifecycleIs):
        return TrueCond()
    return item


def _validate_update(spec: UpdateSpec, schema: DataSchema) -> List[Violation]:
    problems: List[Violation] = []
    where = f"update {spec.name}"
    cvars = set(schema.case_var_names())
    for h in spec.pre.head:
        if h.name in cvars:
            problems.append(Violation("CaseVarInHead", f"{where}: case variable {h.name} cannot be an answer variable"))
        if h.sort is not None and schema.sort(h.sort) is None:
            problems.append(Violation("UnknownSort", f"{where}: unknown sort {h.sort}"))
    if not spec.pre.body:
        problems.append(Violation("EmptyGuard", f"{where}: guard body must be a nonempty disjunction"))
    bodies = spec.pre.body or (Query((TrueCond(),)),)
    for query in bodies:
        env = update_env(spec, query, schema)
        missing = set(spec.pre.head_names) - free_vars(query, schema)
        if missing:
            problems.append(Violation(
                "AnswerVariableNotFree", f"{where}: answer variables {sorted(missing)} missing from a disjunct"))
        _check_query(query, env, schema, where, problems)
        problems.extend(_validate_effect(spec, env, schema, where))
        problems.extend(Violation("IllTypedUpdate", p) for p in env.problems)
    return problems


def _validate_effect(spec: UpdateSpec, env: TypeEnv, schema: DataSchema, where: str) -> List[Violation]:
    problems: List[Violation] = []
    eff = spec.eff
    if eff is None:
        return problems
    if isinstance(eff, (InsertSet, DeleteSet)):
        targets = [a.var for a in eff.assignments]
        for name, count in Counter(targets).items():
            if count > 1:
                problems.append(Violation("DuplicateAssignment", f"{where}: {name} assigned twice"))
        for assignment in eff.assignments:
            if assignment.var == SELF:
                problems.append(Violation("SelfAssigned", f"{where}: self is never explicitly set"))
                continue
            var = schema.case_var(assignment.var)
            if var is None:
                problems.append(Violation("UnknownCaseVar", f"{where}: {assignment.var} is not a case variable"))
                continue
            env.check_term(assignment.term, var.sort, where)
        if eff.values is not None:
            rel = schema.relation(eff.relation)
            if rel is None or not schema.is_repository(eff.relation):
                problems.append(Violation("UnknownRelation", f"{where}: {eff.relation} is not a repository relation"))
            elif rel.arity != len(eff.values):
                problems.append(Violation("ArityMismatch", f"{where}: {eff.relation} expects {rel.arity} terms"))
            else:
                for term, attr in zip(eff.values, rel.attributes):
                    env.check_term(term, attr.sort, where)
    elif isinstance(eff, CondUpdate):
        rel = schema.relation(eff.relation)
        if rel is None or not schema.is_repository(eff.relation):
            problems.append(Violation("UnknownRelation", f"{where}: {eff.relation} is not a repository relation"))
            return problems
        if rel.arity != len(eff.variables):
            problems.append(Violation("ArityMismatch", f"{where}: {eff.relation} expects {rel.arity} variables"))
            return problems
        clash = set(eff.variables) & (set(schema.case_var_names()) | set(spec.pre.head_names))
        if clash:
            problems.append(Violation(
                "CondUpdateVarClash", f"{where}: update variables {sorted(clash)} clash with case or answer variables"))
        problems.extend(_validate_branch(eff.branch, eff.relation, env, schema, where))
    return problems


def _validate_branch(branch, relation: str, env: TypeEnv, schema: DataSchema, where: str) -> List[Violation]:
    problems: List[Violation] = []
    if isinstance(branch, Atom):
        if branch.relation != relation or branch.negated:
            problems.append(Violation("BadBranch", f"{where}: branches must be positive {relation} atoms"))
        else:
            env.check_item(branch, where)
        return problems
    if not is_repo_free(branch.filter, schema):
        problems.append(Violation("RepoInFilter", f"{where}: conditional update filters must be repo-free"))
    for query in branch.filter:
        local = env.copy().infer(query.items)
        _check_query(query, local, schema, where, problems)
        env.problems.extend(local.problems)
    problems.extend(_validate_branch(branch.then, relation, env, schema, where))
    problems.extend(_validate_branch(branch.otherwise, relation, env, schema, where))
    return problems


def _validate_condition(cond: Condition, schema: DataSchema, where: str) -> List[Violation]:
    """Gateway conditions: case variables and constants only"""
    problems = []
    env = TypeEnv(schema).infer([cond])
    for term in condition_terms(cond):
        if isinstance(term, Variable) and schema.case_var(term.name) is None:
            problems.append(Violation(
                "GatewayConditionNotCaseLevel", f"{where}: '{term.name}' is not a case variable"))
            return problems
    env.check_item(cond, where)
    problems.extend(Violation("IllTypedCondition", p) for p in env.problems)
    return problems


def _validate_blocks(m: DabModel) -> List[Violation]:
    problems: List[Violation] = []
    blocks = m.blocks()
    if m.root.kind != BlockKind.PROCESS:
        problems.append(Violation("RootNotProcess", f"root block {m.root.name} must be a process block"))
    for name, count in Counter(b.name for b in blocks).items():
        if count > 1:
            problems.append(Violation("DuplicateBlockName", f"block name {name} used {count} times"))
    cvars = set(m.data.case_var_names())
    for b in blocks:
        where = f"block {b.name}"
        if b.name in cvars:
            problems.append(Violation("BlockNameClash", f"{where}: name clashes with a case variable"))
        low, high = _CHILD_COUNT[b.kind]
        if len(b.children) < low or (high is not None and len(b.children) > high):
            expected = f"{low}" if low == high else f"{low}..{high if high is not None else 'n'}"
            problems.append(Violation(
                "BlockArity", f"{where}: {b.kind.value} expects {expected} nested blocks, got {len(b.children)}"))
        table = _ATTRIBUTE_TABLE[b.kind]
        for key, value in b.attributes:
            if key not in table:
                problems.append(Violation("BadBlockAttribute", f"{where}: unknown attribute {key}"))
                continue
            allowed = table[key]
            if allowed == "flag":
                if value is not True:
                    problems.append(Violation("BadBlockAttribute", f"{where}: {key} is a flag"))
            elif allowed == "cond":
                if isinstance(value, str) or value is True:
                    problems.append(Violation("BadBlockAttribute", f"{where}: {key} must be a condition"))
                else:
                    problems.extend(_validate_condition(value, m.data, where))
            elif isinstance(allowed, tuple):
                if value not in allowed:
                    problems.append(Violation(
                        "BadBlockAttribute", f"{where}: {key} must be one of {', '.join(allowed)}"))
            elif not isinstance(value, str):
                problems.append(Violation("BadBlockAttribute", f"{where}: {key} must be a name"))
        problems.extend(_validate_block_shape(b, m))
    return problems


def _validate_block_shape(b: Block, m: DabModel) -> List[Violation]:
    problems: List[Violation] = []
    where = f"block {b.name}"
    update_keys = [key for key in ("update", "start-update", "end-update", "error-update") if b.has(key)]
    for key in update_keys:
        if m.update(b.attr(key)) is None:
            problems.append(Violation("UnknownUpdateSpec", f"{where}: unknown update specification {b.attr(key)}"))
    if b.kind == BlockKind.TASK:
        if b.has("atomic") and b.has("nonatomic"):
            problems.append(Violation("BadBlockAttribute", f"{where}: task cannot be both atomic and nonatomic"))
        spec = m.update(b.update)
        if not b.atomic and spec is not None and spec.kind in ("insert", "delete", "cond-update"):
            problems.append(Violation(
                "NonAtomicRepoEffect", f"{where}: nonatomic tasks may only update case variables"))
        if not b.atomic and spec is not None and not is_repo_free(spec.pre, m.data):
            problems.append(Violation(
                "NonAtomicRepoEffect", f"{where}: nonatomic task preconditions may not query the repository"))
    elif b.kind == BlockKind.CHOICE:
        if b.has("excl") == b.has("incl"):
            problems.append(Violation("BadBlockAttribute", f"{where}: choice must be exactly one of excl/incl"))
        if not b.has("cond1"):
            problems.append(Violation("BadBlockAttribute", f"{where}: choice requires cond1"))
        if b.has("incl") and not b.has("cond2"):
            problems.append(Violation("BadBlockAttribute", f"{where}: inclusive choice requires cond2"))
    elif b.kind == BlockKind.LOOP and not b.has("cond"):
        problems.append(Violation("BadBlockAttribute", f"{where}: loop requires cond"))
    elif b.kind == BlockKind.COMPLETION:
        if not b.has("cond") or not b.has("end"):
            problems.append(Violation("BadBlockAttribute", f"{where}: possible completion requires cond and end"))
        if b.attr("end") == "error":
            problems.extend(_check_error_target(b, m))
    elif b.kind == BlockKind.SUBPROCESS:
        if b.children and b.children[0].kind != BlockKind.PROCESS:
            problems.append(Violation("BlockArity", f"{where}: a subprocess wraps a process block"))
    elif b.kind in EXCEPTION_KINDS:
        if b.children and b.children[0].kind != BlockKind.SUBPROCESS:
            problems.append(Violation("BlockArity", f"{where}: the protected block must be a subprocess"))
        if not b.has("boundary"):
            problems.append(Violation("BadBlockAttribute", f"{where}: boundary event type required"))
    elif b.kind == BlockKind.EVENT_CHOICE:
        if any(child.kind != BlockKind.EVENT for child in b.children[:2]):
            problems.append(Violation("BlockArity", f"{where}: the first two nested blocks must be catch events"))
    elif b.kind == BlockKind.ERR_EVENT:
        if not b.has("label"):
            problems.append(Violation("BadBlockAttribute", f"{where}: error label required"))
        else:
            problems.extend(_check_error_target(b, m))
    return problems


def _check_error_target(b: Block, m: DabModel) -> List[Violation]:
    if error_handler(m, b) is None:
        return [Violation(
            "UnknownErrorLabel",
            f"block {b.name}: no enclosing error boundary handles label {b.attr('label')}")]
    return []


def error_handler(m: DabModel, thrower: Block) -> Optional[Block]:
    """Innermost exception block whose protected subprocess encloses ``thrower`` and catches its label"""
    label = thrower.attr("label")
    inside = {thrower.name}
    for ancestor in m.ancestors(thrower.name):
        if ancestor.kind in EXCEPTION_KINDS and ancestor.attr("boundary") == "error":
            protected = ancestor.children[0] if ancestor.children else None
            if protected is not None and protected.name in inside:
                if ancestor.attr("label") in (None, label):
                    return ancestor
        inside.add(ancestor.name)
    return None


def validate_dab(m: DabModel) -> ValidationReport:
    """Schema validation plus block tree, update specification and typing checks"""
    problems: List[Violation] = list(validate_data_schema(m.data).violations)
    for name, count in Counter(spec.name for spec in m.updates).items():
        if count > 1:
            problems.append(Violation("DuplicateUpdateSpec", f"update specification {name} declared {count} times"))
    for spec in m.updates:
        problems.extend(_validate_update(spec, m.data))
    problems.extend(_validate_blocks(m))
    report = _report(problems)
    if not report.ok:
        logger.debug(f"Model validation found {len(report.errors)} error(s)")
    return report


def validate_property(p: Property, m: DabModel) -> ValidationReport:
    problems: List[Violation] = []
    if not p.indexes:
        problems.append(Violation(
            "DegenerateEmptyProperty", "property has no indexes and denotes true", severity="warning"))
    for name, count in Counter(p.indexes).items():
        if count > 1:
            problems.append(Violation("DuplicateIndex", f"index {name} declared {count} times"))
    names = {b.name for b in m.blocks()}
    for index, body in p.items():
        where = f"property index {index}"
        for query in body:
            for item in query.items:
                atom = item.body if isinstance(item, Not) else item
                if isinstance(atom, LifecycleIs):
                    if atom.block not in names:
                        problems.append(Violation("UnknownBlock", f"{where}: no block named {atom.block}"))
                    if atom.state not in LIFECYCLE_STATES:
                        problems.append(Violation(
                            "IllegalLifecycleState", f"{where}: {atom.state} is not a lifecycle state"))
            env = TypeEnv(m.data).infer(query.items)
            _check_query(query, env, m.data, where, problems, allow_lifecycle=True)
            problems.extend(Violation("IllTypedProperty", msg) for msg in env.problems)
            covered = {
                term.name
                for item in query.items
                if isinstance(item, Atom) and not item.negated and m.data.is_repository(item.relation)
                for term in item.terms if isinstance(term, Variable)
            }
            uncovered = free_vars(query, m.data) - covered
            if uncovered:
                problems.append(Violation(
                    "UncoveredDataVariable",
                    f"{where}: data variables {sorted(uncovered)} do not appear in a repository atom"))
    return _report(problems)


__all__ = [
    "UNDEF", "SELF", "BOOL", "LIFECYCLE_STATES", "SortKind", "Placement", "Sort", "BOOL_SORT", "Attribute",
    "RelationSchema", "CaseVar", "DataSchema", "Variable", "Constant", "Term", "Eq", "Not", "And", "OneOf",
    "TrueCond", "LifecycleIs", "Condition", "Atom", "Item", "Query", "HeadVar", "Guard", "TRUE_GUARD",
    "Assignment", "InsertSet", "DeleteSet", "CondBranch", "CondUpdate", "Effect", "UpdateSpec", "BlockKind",
    "AttrValue", "EXCEPTION_KINDS", "Block", "Property", "Fact", "DabModel", "Violation", "ValidationReport",
    "condition_terms", "item_terms", "query_variables", "free_vars", "case_vars", "is_repo_free", "is_cubical",
    "effect_terms", "branch_leaves", "TypeEnv", "guard_env", "update_env", "validate_data_schema",
    "error_handler", "validate_dab", "validate_property",
]
