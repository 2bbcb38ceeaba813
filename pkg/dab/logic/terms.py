"""
Multi-sorted equational terms, literals and formulas.

Terms are variables, constants, scalar state variables, array reads ``a[e]``
and unary function applications ``f(t)``. Negation only occurs in literals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

import networkx as nx

from dab.errors import ArityMismatch
from dab.model import BOOL, UNDEF, DataSchema

LIFECYCLE = "Lifecycle"
CASEID = "caseid"


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    """Existentially quantified variable (answer variable or array index)"""
    name: str
    sort: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str
    sort: str

    def __str__(self) -> str:
        return f"{self.name}:{self.sort}" if self.name == UNDEF else self.name


@dataclass(frozen=True)
class StateVar:
    """Scalar artifact variable"""
    name: str
    sort: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Read:
    """Array component read ``array[index]``"""
    array: str
    index: "Term"
    sort: str

    def __str__(self) -> str:
        return f"{self.array}[{self.index}]"


@dataclass(frozen=True)
class App:
    """Unary function application"""
    fn: str
    arg: "Term"
    sort: str

    def __str__(self) -> str:
        return f"{self.fn}({self.arg})"


Term = Union[Var, Const, StateVar, Read, App]


def undef(sort: str) -> Const:
    return Const(UNDEF, sort)


def is_undef(t: Term) -> bool:
    return isinstance(t, Const) and t.name == UNDEF


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Read):
        yield from subterms(t.index)
    elif isinstance(t, App):
        yield from subterms(t.arg)


def term_depth(t: Term) -> int:
    if isinstance(t, Read):
        return 1 + term_depth(t.index)
    if isinstance(t, App):
        return 1 + term_depth(t.arg)
    return 0


def substitute(t: Term, mapping: Mapping[Term, Term]) -> Term:
    """Simultaneous top-down replacement"""
    if t in mapping:
        return mapping[t]
    if isinstance(t, Read):
        index = substitute(t.index, mapping)
        return t if index is t.index else Read(t.array, index, t.sort)
    if isinstance(t, App):
        arg = substitute(t.arg, mapping)
        return t if arg is t.arg else App(t.fn, arg, t.sort)
    return t


_RANK = {Const: 0, StateVar: 1, Var: 2, Read: 3, App: 4}


def term_key(t: Term) -> tuple:
    """Total order on terms; smaller terms make better class representatives"""
    return (term_depth(t), _RANK[type(t)], str(t), t.sort)


# ---------------------------------------------------------------------------
# Literals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} != {self.right}"


@dataclass(frozen=True)
class Mem:
    """``term`` equals one of the named constants of its (closed) sort"""
    term: Term
    values: FrozenSet[str]

    def __str__(self) -> str:
        return f"{self.term} in {{{', '.join(_ordered(self.values))}}}"


@dataclass(frozen=True)
class NotMem:
    term: Term
    values: FrozenSet[str]

    def __str__(self) -> str:
        return f"{self.term} notin {{{', '.join(_ordered(self.values))}}}"


Literal = Union[Eq, Neq, Mem, NotMem]


def _ordered(values: Iterable[str]) -> List[str]:
    values = list(values)
    if all(v.lstrip("-").isdigit() for v in values):
        return sorted(values, key=int)
    return sorted(values)


def _pair(left: Term, right: Term) -> Tuple[Term, Term]:
    return (left, right) if term_key(left) <= term_key(right) else (right, left)


def eq(left: Term, right: Term) -> Eq:
    return Eq(*_pair(left, right))


def neq(left: Term, right: Term) -> Neq:
    return Neq(*_pair(left, right))


def mem(term: Term, values: Iterable[str]) -> Literal:
    values = frozenset(values)
    if len(values) == 1:
        return eq(term, Const(next(iter(values)), term.sort))
    return Mem(term, values)


def not_mem(term: Term, values: Iterable[str]) -> Literal:
    values = frozenset(values)
    if len(values) == 1:
        return neq(term, Const(next(iter(values)), term.sort))
    return NotMem(term, values)


def negate(lit: Literal) -> Literal:
    if isinstance(lit, Eq):
        return Neq(lit.left, lit.right)
    if isinstance(lit, Neq):
        return Eq(lit.left, lit.right)
    if isinstance(lit, Mem):
        return NotMem(lit.term, lit.values)
    return Mem(lit.term, lit.values)


def literal_terms(lit: Literal) -> Tuple[Term, ...]:
    if isinstance(lit, (Eq, Neq)):
        return (lit.left, lit.right)
    return (lit.term,)


def literal_subterms(lit: Literal) -> Iterator[Term]:
    for t in literal_terms(lit):
        yield from subterms(t)


def subst_literal(lit: Literal, mapping: Mapping[Term, Term]) -> Literal:
    if isinstance(lit, Eq):
        return eq(substitute(lit.left, mapping), substitute(lit.right, mapping))
    if isinstance(lit, Neq):
        return neq(substitute(lit.left, mapping), substitute(lit.right, mapping))
    if isinstance(lit, Mem):
        return Mem(substitute(lit.term, mapping), lit.values)
    return NotMem(substitute(lit.term, mapping), lit.values)


def trivial(lit: Literal) -> Optional[bool]:
    """Truth value decidable by syntax alone (unique names for constants), else None"""
    if isinstance(lit, (Eq, Neq)):
        left, right = lit.left, lit.right
        if left == right:
            value = True
        elif isinstance(left, Const) and isinstance(right, Const):
            value = False
        else:
            return None
        return value if isinstance(lit, Eq) else not value
    if isinstance(lit.term, Const):
        inside = lit.term.name in lit.values
        return inside if isinstance(lit, Mem) else not inside
    if isinstance(lit, Mem) and not lit.values:
        return False
    if isinstance(lit, NotMem) and not lit.values:
        return True
    return None


def literal_key(lit: Literal) -> str:
    return str(lit)


# ---------------------------------------------------------------------------
# Cubes and state formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cube:
    """Existential closure of a conjunction of literals: every Var is quantified"""
    literals: FrozenSet[Literal] = field(default_factory=frozenset)

    @staticmethod
    def of(literals: Iterable[Literal]) -> Optional["Cube"]:
        """Build a cube, dropping true literals; None if a literal is syntactically false"""
        kept = set()
        for lit in literals:
            value = trivial(lit)
            if value is False:
                return None
            if value is None:
                kept.add(lit)
        return Cube(frozenset(kept))

    def sorted_literals(self) -> List[Literal]:
        return sorted(self.literals, key=literal_key)

    def terms(self) -> Iterator[Term]:
        for lit in self.literals:
            yield from literal_subterms(lit)

    def variables(self) -> FrozenSet[Var]:
        return frozenset(t for t in self.terms() if isinstance(t, Var))

    def reads(self) -> FrozenSet[str]:
        """Names of state variables and arrays mentioned"""
        names = set()
        for t in self.terms():
            if isinstance(t, StateVar):
                names.add(t.name)
            elif isinstance(t, Read):
                names.add(t.array)
        return frozenset(names)

    def substitute(self, mapping: Mapping[Term, Term]) -> Optional["Cube"]:
        return Cube.of(subst_literal(lit, mapping) for lit in self.literals)

    def conjoin(self, literals: Iterable[Literal]) -> Optional["Cube"]:
        return Cube.of(list(self.literals) + list(literals))

    def __str__(self) -> str:
        if not self.literals:
            return "true"
        body = " & ".join(str(lit) for lit in self.sorted_literals())
        variables = sorted(self.variables(), key=lambda v: v.name)
        if not variables:
            return body
        return f"exists {', '.join(f'{v.name}:{v.sort}' for v in variables)}. {body}"


StateFormula = Tuple[Cube, ...]
FALSE_FORMULA: StateFormula = ()


def formula_str(phi: StateFormula) -> str:
    if not phi:
        return "false"
    return " | ".join(f"({cube})" for cube in phi)


# ---------------------------------------------------------------------------
# General formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class FAnd:
    items: Tuple["Formula", ...]


@dataclass(frozen=True)
class FOr:
    items: Tuple["Formula", ...]


@dataclass(frozen=True)
class Exists:
    variables: Tuple[Var, ...]
    body: "Formula"


@dataclass(frozen=True)
class CatalogAtom:
    """Relational catalog atom awaiting rewriting into function applications"""
    relation: str
    args: Tuple[Term, ...]
    negated: bool = False


TRUE = Top()
FALSE = Bottom()

Formula = Union[Top, Bottom, FAnd, FOr, Exists, CatalogAtom, Eq, Neq, Mem, NotMem]


def cube_formula(cube: Cube) -> Formula:
    body = FAnd(tuple(cube.sorted_literals())) if cube.literals else TRUE
    variables = tuple(sorted(cube.variables(), key=lambda v: v.name))
    return Exists(variables, body) if variables else body


def state_formula(phi: StateFormula) -> Formula:
    return FOr(tuple(cube_formula(c) for c in phi)) if phi else FALSE


def map_formula(phi: Formula, fn: Callable[[Formula], Formula]) -> Formula:
    """Rebuild bottom-up, applying ``fn`` to every leaf"""
    if isinstance(phi, FAnd):
        return FAnd(tuple(map_formula(i, fn) for i in phi.items))
    if isinstance(phi, FOr):
        return FOr(tuple(map_formula(i, fn) for i in phi.items))
    if isinstance(phi, Exists):
        return Exists(phi.variables, map_formula(phi.body, fn))
    return fn(phi)


def to_cubes(phi: Formula) -> List[Tuple[List[Var], List[Literal]]]:
    """Disjunctive normal form with existential variables pulled to the front"""
    if isinstance(phi, Top):
        return [([], [])]
    if isinstance(phi, Bottom):
        return []
    if isinstance(phi, (Eq, Neq, Mem, NotMem)):
        return [([], [phi])]
    if isinstance(phi, Exists):
        return [(list(phi.variables) + vs, lits) for vs, lits in to_cubes(phi.body)]
    if isinstance(phi, FOr):
        return [c for item in phi.items for c in to_cubes(item)]
    if isinstance(phi, FAnd):
        result = [([], [])]
        for item in phi.items:
            result = [(va + vb, la + lb) for va, la in result for vb, lb in to_cubes(item)]
        return result
    raise TypeError(f"cannot normalise {type(phi).__name__}; rewrite catalog atoms first")


# ---------------------------------------------------------------------------
# Signature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SortInfo:
    name: str
    kind: str
    carrier: Optional[Tuple[str, ...]] = None
    constants: Tuple[str, ...] = ()

    @property
    def artifact(self) -> bool:
        return self.kind == "artifact"

    @property
    def closed(self) -> bool:
        return self.carrier is not None

    def domain(self) -> Optional[Tuple[str, ...]]:
        """All values of a closed sort, undef included"""
        if self.carrier is None:
            return None
        return tuple(self.carrier) + (UNDEF,)


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    source: str
    target: str
    injective: bool = False

    @property
    def null_axiom(self) -> bool:
        return not self.injective


class Signature:
    """Sorts, unary functions and constants of the DB theory, plus artifact sorts"""

    def __init__(self, sorts: Iterable[SortInfo], functions: Iterable[FunctionSymbol] = (),
                 relations: Optional[Dict[str, Tuple[str, Tuple[str, ...]]]] = None):
        self.sorts: Dict[str, SortInfo] = {s.name: s for s in sorts}
        self.functions: Dict[str, FunctionSymbol] = {f.name: f for f in functions}
        self.relations: Dict[str, Tuple[str, Tuple[str, ...]]] = dict(relations or {})
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(self.sorts)
        for f in self.functions.values():
            self.graph.add_edge(f.source, f.target, function=f.name)

    @property
    def acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.graph)

    @property
    def depth(self) -> int:
        """Longest path in the function graph; bounds the nesting of closure terms"""
        if not self.acyclic:
            return len(self.sorts)
        return nx.dag_longest_path_length(self.graph)

    def sort(self, name: str) -> SortInfo:
        return self.sorts[name]

    def functions_from(self, sort: str) -> List[FunctionSymbol]:
        return [f for f in self.functions.values() if f.source == sort]

    def artifact_sorts(self) -> List[str]:
        return [s.name for s in self.sorts.values() if s.artifact]

    def constants_of(self, sort: str) -> Tuple[str, ...]:
        info = self.sorts.get(sort)
        if info is None:
            return ()
        return tuple(dict.fromkeys((info.carrier or ()) + info.constants))

    def extended(self, sorts: Iterable[SortInfo] = (), functions: Iterable[FunctionSymbol] = ()) -> "Signature":
        return Signature(list(self.sorts.values()) + list(sorts),
                         list(self.functions.values()) + list(functions), self.relations)

    def __repr__(self) -> str:
        return f"Signature(sorts={sorted(self.sorts)}, functions={sorted(self.functions)})"


def function_name(relation: str, attribute: str) -> str:
    return f"f_{relation}_{attribute}"


def catalog_to_signature(schema: DataSchema) -> Signature:
    """One function f_{R,A}: key sort -> sort(A) per non-key catalog attribute"""
    sorts = []
    for s in schema.all_sorts():
        constants = tuple(name for name, sort in schema.constants if sort == s.name)
        sorts.append(SortInfo(s.name, s.kind.value, s.carrier, constants))
    functions, relations = [], {}
    for rel in schema.catalog:
        key = rel.attributes[0]
        names = []
        for attr in rel.attributes[1:]:
            name = function_name(rel.name, attr.name)
            functions.append(FunctionSymbol(name, key.sort, attr.sort))
            names.append(name)
        relations[rel.name] = (key.sort, tuple(names))
    return Signature(sorts, functions, relations)


def catalog_literals(relation: str, args: Tuple[Term, ...], sig: Signature) -> List[Literal]:
    """Positive catalog atom as a conjunction of literals"""
    if relation not in sig.relations:
        raise ArityMismatch(f"{relation} is not a catalog relation")
    key_sort, fns = sig.relations[relation]
    if len(args) != len(fns) + 1:
        raise ArityMismatch(f"{relation} expects {len(fns) + 1} arguments, got {len(args)}")
    key = args[0]
    lits: List[Literal] = [neq(key, undef(key_sort))]
    for fn, arg in zip(fns, args[1:]):
        lits.append(eq(arg, App(fn, key, sig.functions[fn].target)))
    return lits


def rewrite_catalog_atoms(phi: Formula, sig: Signature) -> Formula:
    """R(t0..tn) becomes t0 != undef & tk = fk(t0); the negation becomes the dual disjunction"""
    def rewrite(leaf: Formula) -> Formula:
        if not isinstance(leaf, CatalogAtom):
            return leaf
        lits = catalog_literals(leaf.relation, leaf.args, sig)
        if not leaf.negated:
            return FAnd(tuple(lits))
        return FOr(tuple(negate(lit) for lit in lits))
    return map_formula(phi, rewrite)


__all__ = [
    "LIFECYCLE", "CASEID", "BOOL", "UNDEF",
    "Var", "Const", "StateVar", "Read", "App", "Term", "undef", "is_undef", "subterms",
    "term_depth", "substitute", "term_key",
    "Eq", "Neq", "Mem", "NotMem", "Literal", "eq", "neq", "mem", "not_mem", "negate",
    "literal_terms", "literal_subterms", "subst_literal", "trivial", "literal_key",
    "Cube", "StateFormula", "FALSE_FORMULA", "formula_str",
    "Top", "Bottom", "FAnd", "FOr", "Exists", "CatalogAtom", "TRUE", "FALSE", "Formula",
    "cube_formula", "state_formula", "map_formula", "to_cubes",
    "SortInfo", "FunctionSymbol", "Signature", "function_name", "catalog_to_signature",
    "catalog_literals", "rewrite_catalog_atoms",
]
