"""
Internal decision procedure for the DB theory.

Congruence closure with union-find, the undef axioms (``x = undef`` iff
``f(x) = undef`` for every catalog function), injectivity of ``caseid``,
unique names for constants and finite carriers for closed sorts. Ground
clauses coming from entailment checks are handled by a small DPLL loop on top.
"""
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from dab.errors import NonGroundInput
from dab.logic.terms import (
    App, Const, Cube, Eq, Literal, Mem, Neq, NotMem, Read, Signature, Term,
    is_undef, literal_subterms, literal_terms, negate, subterms, term_key, trivial, undef,
)
from dab.model import UNDEF

logger = logging.getLogger(__name__)


class EGraph:
    """Union-find over a finite term universe with literal bookkeeping"""

    def __init__(self, sig: Signature):
        self.sig = sig
        self.terms: List[Term] = []
        self.ids: Dict[Term, int] = {}
        self.parent: List[int] = []
        self.const: Dict[int, str] = {}
        self.apps: List[Tuple[int, Tuple[str, str], int]] = []
        self.diseqs: List[Tuple[int, int]] = []
        self.allowed: Dict[int, FrozenSet[str]] = {}
        self.forbidden: Dict[int, Set[str]] = {}
        self.conflict = False

    def copy(self) -> "EGraph":
        other = EGraph.__new__(EGraph)
        other.sig = self.sig
        other.terms = list(self.terms)
        other.ids = dict(self.ids)
        other.parent = list(self.parent)
        other.const = dict(self.const)
        other.apps = list(self.apps)
        other.diseqs = list(self.diseqs)
        other.allowed = dict(self.allowed)
        other.forbidden = {k: set(v) for k, v in self.forbidden.items()}
        other.conflict = self.conflict
        return other

    # -- construction ------------------------------------------------------

    def add(self, t: Term) -> int:
        if t in self.ids:
            return self.ids[t]
        child = None
        if isinstance(t, Read):
            child = self.add(t.index)
        elif isinstance(t, App):
            child = self.add(t.arg)
        tid = len(self.terms)
        self.terms.append(t)
        self.ids[t] = tid
        self.parent.append(tid)
        if isinstance(t, Const):
            self.const[tid] = t.name
        if isinstance(t, Read):
            self.apps.append((tid, ("read", t.array), child))
        elif isinstance(t, App):
            self.apps.append((tid, ("app", t.fn), child))
            fn = self.sig.functions.get(t.fn)
            if fn is not None and fn.null_axiom:
                self.add(undef(fn.source))
                self.add(undef(fn.target))
        return tid

    def close_under_functions(self, depth: Optional[int] = None) -> None:
        """Add f(t) for every term t of a function's source sort, up to the signature depth"""
        depth = self.sig.depth if depth is None else depth
        frontier = [t for t in self.terms if not isinstance(t, Const)]
        for _ in range(depth):
            added = []
            for t in frontier:
                for fn in self.sig.functions_from(t.sort):
                    if fn.injective:
                        continue
                    app = App(fn.name, t, fn.target)
                    if app not in self.ids:
                        self.add(app)
                        added.append(app)
            if not added:
                break
            frontier = added

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        # keep the smaller representative term on top
        if term_key(self.terms[rb]) < term_key(self.terms[ra]):
            ra, rb = rb, ra
        self.parent[rb] = ra
        ca, cb = self.const.get(ra), self.const.get(rb)
        if cb is not None:
            if ca is not None and ca != cb:
                self.conflict = True
            self.const[ra] = cb if ca is None else ca
        return True

    def assert_literal(self, lit: Literal) -> None:
        for t in literal_terms(lit):
            self.add(t)
        if isinstance(lit, Eq):
            self.union(self.ids[lit.left], self.ids[lit.right])
        elif isinstance(lit, Neq):
            self.diseqs.append((self.ids[lit.left], self.ids[lit.right]))
        elif isinstance(lit, Mem):
            tid = self.ids[lit.term]
            self.allowed[tid] = self.allowed.get(tid, lit.values) & lit.values
        else:
            self.forbidden.setdefault(self.ids[lit.term], set()).update(lit.values)

    # -- propagation -------------------------------------------------------

    def undef_id(self, sort: str) -> int:
        return self.add(undef(sort))

    def propagate(self) -> bool:
        """Run congruence and axiom propagation to a fixpoint; False on conflict"""
        if self.conflict:
            return False
        changed = True
        while changed and not self.conflict:
            changed = False
            table: Dict[Tuple[Tuple[str, str], int], int] = {}
            caseids: Dict[int, int] = {}
            for tid, fn, arg in self.apps:
                key = (fn, self.find(arg))
                if key in table:
                    changed |= self.union(table[key], tid)
                else:
                    table[key] = tid
                symbol = self.sig.functions.get(fn[1]) if fn[0] == "app" else None
                if symbol is None:
                    continue
                if symbol.injective:
                    root = self.find(tid)
                    if root in caseids and self.find(caseids[root]) != self.find(arg):
                        changed |= self.union(caseids[root], arg)
                    caseids.setdefault(root, arg)
                    continue
                src, tgt = self.ids[undef(symbol.source)], self.ids[undef(symbol.target)]
                if self.find(arg) == self.find(src) and self.find(tid) != self.find(tgt):
                    changed |= self.union(tid, tgt)
                elif self.find(tid) == self.find(tgt) and self.find(arg) != self.find(src):
                    changed |= self.union(arg, src)
            for tid, values in list(self.allowed.items()):
                root = self.find(tid)
                if root not in self.const and len(values) == 1:
                    value = next(iter(values))
                    changed |= self.union(root, self.add(Const(value, self.terms[tid].sort)))
        return not self._has_conflict()

    def _has_conflict(self) -> bool:
        if self.conflict:
            return True
        for a, b in self.diseqs:
            if self.find(a) == self.find(b):
                return True
        for tid, values in self.allowed.items():
            value = self.const.get(self.find(tid))
            if value is not None and value not in values:
                return True
            if not values:
                return True
        for tid, values in self.forbidden.items():
            value = self.const.get(self.find(tid))
            if value is not None and value in values:
                return True
        for tid, fn, arg in self.apps:
            symbol = self.sig.functions.get(fn[1]) if fn[0] == "app" else None
            if symbol is not None and symbol.injective and self.const.get(self.find(tid)) == UNDEF:
                return True
        return False

    # -- queries -----------------------------------------------------------

    def same(self, a: Term, b: Term) -> bool:
        return a in self.ids and b in self.ids and self.find(self.ids[a]) == self.find(self.ids[b])

    def distinct(self, a: Term, b: Term) -> bool:
        if a not in self.ids or b not in self.ids:
            return False
        return self.distinct_roots(self.find(self.ids[a]), self.find(self.ids[b]))

    def distinct_roots(self, ra: int, rb: int) -> bool:
        """Whether two classes are forced apart by constants, disequalities or value restrictions"""
        if ra == rb:
            return False
        ca, cb = self.const.get(ra), self.const.get(rb)
        if ca is not None and cb is not None:
            return ca != cb
        if any({self.find(x), self.find(y)} == {ra, rb} for x, y in self.diseqs):
            return True
        for root, value in ((rb, ca), (ra, cb)):
            if value is not None:
                allowed = self._class_allowed(root)
                if allowed is not None and value not in allowed:
                    return True
        return False

    def value(self, t: Term) -> Optional[str]:
        if t not in self.ids:
            return None
        return self.const.get(self.find(self.ids[t]))

    def status(self, lit: Literal) -> Optional[bool]:
        """Truth value of a literal forced by the current closure, else None"""
        if isinstance(lit, (Eq, Neq)):
            if self.same(lit.left, lit.right):
                value = True
            elif self.distinct(lit.left, lit.right):
                value = False
            else:
                return None
            return value if isinstance(lit, Eq) else not value
        value = self.value(lit.term)
        if value is None:
            allowed = self.allowed_values(lit.term)
            if allowed is not None and allowed <= lit.values:
                return isinstance(lit, Mem)
            if allowed is not None and not (allowed & lit.values):
                return isinstance(lit, NotMem)
            return None
        inside = value in lit.values
        return inside if isinstance(lit, Mem) else not inside

    def allowed_values(self, t: Term) -> Optional[FrozenSet[str]]:
        if t not in self.ids:
            return None
        root = self.find(self.ids[t])
        return self._class_allowed(root)

    def classes(self) -> Dict[int, List[int]]:
        result: Dict[int, List[int]] = {}
        for tid in range(len(self.terms)):
            result.setdefault(self.find(tid), []).append(tid)
        return result

    def _class_allowed(self, root: int) -> Optional[FrozenSet[str]]:
        sort = self.sig.sorts.get(self.terms[root].sort)
        if sort is None or not sort.closed:
            return None
        if root in self.const:
            return frozenset({self.const[root]})
        allowed = set(sort.domain())
        for tid, values in self.allowed.items():
            if self.find(tid) == root:
                allowed &= values
        for tid, values in self.forbidden.items():
            if self.find(tid) == root:
                allowed -= values
        for a, b in self.diseqs:
            ra, rb = self.find(a), self.find(b)
            other = rb if ra == root else ra if rb == root else None
            if other is not None and other in self.const:
                allowed.discard(self.const[other])
        return frozenset(allowed)

    # -- full check --------------------------------------------------------

    def check(self) -> bool:
        """Satisfiability including finite-carrier colouring of closed-sort classes"""
        if not self.propagate():
            return False
        roots = {self.find(i) for i in range(len(self.terms))}
        open_classes: Dict[int, FrozenSet[str]] = {}
        for root in roots:
            if root in self.const:
                continue
            allowed = self._class_allowed(root)
            if allowed is None:
                continue
            if not allowed:
                return False
            open_classes[root] = allowed
        if not open_classes:
            return True
        degree = {root: 0 for root in open_classes}
        for a, b in self.diseqs:
            ra, rb = self.find(a), self.find(b)
            if ra in open_classes and rb in open_classes:
                degree[ra] += 1
                degree[rb] += 1
        if all(len(allowed) > degree[root] for root, allowed in open_classes.items()):
            return True
        root = min(open_classes, key=lambda r: (len(open_classes[r]), term_key(self.terms[r])))
        for value in sorted(open_classes[root]):
            branch = self.copy()
            branch.union(root, branch.add(Const(value, self.terms[root].sort)))
            if branch.check():
                return True
        return False


def build_egraph(literals: Iterable[Literal], sig: Signature, closure: bool = True,
                 extra_terms: Iterable[Term] = ()) -> EGraph:
    graph = EGraph(sig)
    literals = list(literals)
    for lit in literals:
        for t in literal_subterms(lit):
            if isinstance(t, Const) and t.sort not in sig.sorts:
                raise NonGroundInput(f"unknown sort {t.sort} in {lit}")
            graph.add(t)
    for t in extra_terms:
        graph.add(t)
    if closure:
        graph.close_under_functions()
    for lit in literals:
        graph.assert_literal(lit)
    return graph


def is_sat_internal(cube: Sequence[Literal], sig: Signature) -> bool:
    """Congruence closure decision for a conjunction of ground literals"""
    return build_egraph(cube, sig).check()


@dataclass(frozen=True)
class Obligation:
    """A cube conjoined with ground clauses; the unit of work sent to a backend"""
    cube: Tuple[Literal, ...]
    clauses: Tuple[Tuple[Literal, ...], ...] = ()

    def literals(self) -> Iterable[Literal]:
        yield from self.cube
        for clause in self.clauses:
            yield from clause


def check_obligation(ob: Obligation, sig: Signature) -> bool:
    """DPLL over the clauses with congruence checks at every decision"""
    extra = [t for clause in ob.clauses for lit in clause for t in literal_subterms(lit)]
    graph = build_egraph(ob.cube, sig, extra_terms=extra)
    if not graph.propagate():
        return False
    return _dpll(graph, [tuple(c) for c in ob.clauses])


def _dpll(graph: EGraph, clauses: List[Tuple[Literal, ...]]) -> bool:
    while True:
        if not graph.propagate():
            return False
        pending: List[Tuple[Literal, ...]] = []
        unit: Optional[Literal] = None
        for clause in clauses:
            open_lits = []
            satisfied = False
            for lit in clause:
                value = trivial(lit)
                if value is None:
                    value = graph.status(lit)
                if value is True:
                    satisfied = True
                    break
                if value is None:
                    open_lits.append(lit)
            if satisfied:
                continue
            if not open_lits:
                return False
            if len(open_lits) == 1 and unit is None:
                unit = open_lits[0]
            pending.append(tuple(open_lits))
        if not pending:
            return graph.check()
        if unit is not None:
            graph.assert_literal(unit)
            clauses = pending
            continue
        clause = min(pending, key=len)
        for i, lit in enumerate(clause):
            branch = graph.copy()
            branch.assert_literal(lit)
            # later branches may assume the earlier literals false
            for earlier in clause[:i]:
                branch.assert_literal(negate(earlier))
            if _dpll(branch, pending):
                return True
        return False


__all__ = ["EGraph", "build_egraph", "is_sat_internal", "Obligation", "check_obligation"]
