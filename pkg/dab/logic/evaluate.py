"""
Finite structures and Tarskian evaluation, used as a testing oracle.

Elements are plain strings; every constant denotes the element with its own
name, so unique names hold by construction. ``exists_in_extension`` evaluates
an existential cube in extensions of a structure by fresh elements, which is
the semantics quantifier elimination is tested against.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from dab.errors import UnassignedFreeVariable
from dab.logic.terms import (
    App, Bottom, CatalogAtom, Const, Eq, Exists, FAnd, FOr, Formula, Literal, Mem, Neq, NotMem,
    Read, Signature, StateVar, Term, Top, Var,
)
from dab.model import UNDEF

logger = logging.getLogger(__name__)


@dataclass
class FiniteStructure:
    """Carriers (undef included), function tables, scalar variables and arrays"""
    carriers: Dict[str, Tuple[str, ...]]
    functions: Dict[str, Dict[str, str]] = field(default_factory=dict)
    state: Dict[str, str] = field(default_factory=dict)
    arrays: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def apply(self, fn: str, arg: str) -> str:
        table = self.functions.get(fn, {})
        if arg not in table:
            return UNDEF
        return table[arg]

    def satisfies_null_axiom(self, sig: Signature) -> bool:
        for symbol in sig.functions.values():
            if symbol.injective:
                continue
            for arg in self.carriers.get(symbol.source, ()):
                value = self.apply(symbol.name, arg)
                if (arg == UNDEF) != (value == UNDEF):
                    return False
        return True

    def extended(self, carriers: Mapping[str, Sequence[str]],
                 functions: Mapping[str, Mapping[str, str]]) -> "FiniteStructure":
        new_carriers = dict(self.carriers)
        for sort, extra in carriers.items():
            new_carriers[sort] = tuple(new_carriers.get(sort, ())) + tuple(extra)
        new_functions = {name: dict(table) for name, table in self.functions.items()}
        for name, table in functions.items():
            new_functions.setdefault(name, {}).update(table)
        return FiniteStructure(new_carriers, new_functions, dict(self.state),
                               {k: dict(v) for k, v in self.arrays.items()})


def eval_term(t: Term, m: FiniteStructure, assignment: Mapping[str, str]) -> str:
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Var):
        if t.name not in assignment:
            raise UnassignedFreeVariable(t.name)
        return assignment[t.name]
    if isinstance(t, StateVar):
        if t.name not in m.state:
            raise UnassignedFreeVariable(t.name)
        return m.state[t.name]
    if isinstance(t, Read):
        index = eval_term(t.index, m, assignment)
        return m.arrays.get(t.array, {}).get(index, UNDEF)
    return m.apply(t.fn, eval_term(t.arg, m, assignment))


def eval_literal(lit: Literal, m: FiniteStructure, assignment: Mapping[str, str]) -> bool:
    if isinstance(lit, Eq):
        return eval_term(lit.left, m, assignment) == eval_term(lit.right, m, assignment)
    if isinstance(lit, Neq):
        return eval_term(lit.left, m, assignment) != eval_term(lit.right, m, assignment)
    inside = eval_term(lit.term, m, assignment) in lit.values
    return inside if isinstance(lit, Mem) else not inside


def evaluate(phi: Formula, m: FiniteStructure, assignment: Optional[Mapping[str, str]] = None) -> bool:
    """Standard truth; quantifiers range over the carriers of ``m``"""
    assignment = dict(assignment or {})
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bottom):
        return False
    if isinstance(phi, (Eq, Neq, Mem, NotMem)):
        return eval_literal(phi, m, assignment)
    if isinstance(phi, FAnd):
        return all(evaluate(item, m, assignment) for item in phi.items)
    if isinstance(phi, FOr):
        return any(evaluate(item, m, assignment) for item in phi.items)
    if isinstance(phi, Exists):
        domains = [m.carriers[v.sort] for v in phi.variables]
        for values in itertools.product(*domains):
            inner = dict(assignment)
            inner.update({v.name: value for v, value in zip(phi.variables, values)})
            if evaluate(phi.body, m, inner):
                return True
        return False
    if isinstance(phi, CatalogAtom):
        raise TypeError("catalog atoms must be rewritten before evaluation")
    raise TypeError(f"cannot evaluate {type(phi).__name__}")


def exists_in_extension(variables: Sequence[Var], literals: Iterable[Literal], m: FiniteStructure,
                        sig: Signature, assignment: Mapping[str, str]) -> bool:
    """Whether some extension of ``m`` by fresh elements satisfies ``exists variables. literals``

    Every open sort gets one fresh element per eliminated variable of that sort,
    plus one more; function values on fresh arguments range over the defined
    elements of the target sort (fresh ones included), as the undef axioms require.
    """
    literals = list(literals)
    fresh: Dict[str, List[str]] = {}
    for sort, info in sig.sorts.items():
        if info.closed or sort not in m.carriers:
            continue
        count = 1 + sum(1 for v in variables if v.sort == sort)
        fresh[sort] = [f"_new_{sort}_{k}" for k in range(count)]
    slots = [(fn.name, element, fn.target)
             for fn in sig.functions.values() if not fn.injective
             for element in fresh.get(fn.source, ())]
    choices = [
        [value for value in m.carriers.get(target, ()) + tuple(fresh.get(target, ())) if value != UNDEF]
        for _, _, target in slots
    ]
    domains = [tuple(m.carriers[v.sort]) + tuple(fresh.get(v.sort, ())) for v in variables]
    for values in itertools.product(*domains):
        inner = dict(assignment)
        inner.update({v.name: value for v, value in zip(variables, values)})
        for picks in itertools.product(*choices):
            tables: Dict[str, Dict[str, str]] = {}
            for (fn, element, _), value in zip(slots, picks):
                tables.setdefault(fn, {})[element] = value
            ext = m.extended(fresh, tables)
            if all(eval_literal(lit, ext, inner) for lit in literals):
                return True
    return False


def structures(sig: Signature, carriers: Mapping[str, Sequence[str]]) -> Iterator[FiniteStructure]:
    """All function tables over the given carriers that satisfy the undef axioms"""
    symbols = [fn for fn in sorted(sig.functions.values(), key=lambda f: f.name) if not fn.injective]
    slots = [(fn.name, arg, fn.target) for fn in symbols for arg in carriers[fn.source] if arg != UNDEF]
    choices = [[v for v in carriers[target] if v != UNDEF] for _, _, target in slots]
    for picks in itertools.product(*choices):
        tables: Dict[str, Dict[str, str]] = {fn.name: {UNDEF: UNDEF} for fn in symbols}
        for (fn, arg, _), value in zip(slots, picks):
            tables[fn][arg] = value
        yield FiniteStructure({sort: tuple(values) for sort, values in carriers.items()}, tables)


__all__ = ["FiniteStructure", "eval_term", "eval_literal", "evaluate", "exists_in_extension", "structures"]
