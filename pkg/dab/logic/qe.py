"""
Quantifier elimination (cover computation) for the DB theory.

The input is a cube and a set of basic-sort variables to eliminate. The cube
is saturated under congruence and the undef axioms, every eliminated term that
is equal to a term free of eliminated variables is replaced by it, and the
remaining classes made only of eliminated terms are dropped once their
consequences on free terms are made explicit. Those classes can always be
realised by fresh elements in an extension, except for closed sorts, whose
values are enumerated when the carrier is too small to avoid every neighbour.
"""
import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Union

from dab.errors import CyclicSignature
from dab.logic.solver import EGraph, build_egraph
from dab.logic.terms import (
    App, Const, Cube, Literal, Signature, Term, Var, eq, is_undef, literal_subterms,
    mem, neq, not_mem, subterms, term_key, undef,
)

logger = logging.getLogger(__name__)


def qe_cover(variables: Iterable[Var], cube: Union[Cube, Iterable[Literal]], sig: Signature) -> List[Cube]:
    """Return cubes whose disjunction is equivalent to ``exists variables. cube``"""
    if not sig.acyclic:
        raise CyclicSignature(f"signature functions form a cycle: {sorted(sig.functions)}")
    literals = list(cube.literals) if isinstance(cube, Cube) else list(cube)
    elim = frozenset(variables)
    mentioned = {t for lit in literals for t in literal_subterms(lit) if isinstance(t, Var)}
    if not elim & mentioned:
        result = Cube.of(literals)
        return [result] if result is not None else []
    out: List[Cube] = []
    _cover(elim, literals, sig, out)
    unique = list(dict.fromkeys(out))
    logger.debug(f"Eliminated {len(elim & mentioned)} variable(s) into {len(unique)} cube(s)")
    return unique


def _has_elim(t: Term, elim: FrozenSet[Var]) -> bool:
    return any(isinstance(s, Var) and s in elim for s in subterms(t))


def _undef_app(t: Term) -> bool:
    return isinstance(t, App) and is_undef(t.arg)


def saturate(graph: EGraph) -> bool:
    """Propagate equalities and the disequality half of the undef axioms to a fixpoint"""
    while True:
        if not graph.propagate():
            return False
        added = False
        for tid, fn, arg in graph.apps:
            if fn[0] != "app":
                continue
            symbol = graph.sig.functions.get(fn[1])
            if symbol is None or symbol.injective:
                continue
            ra, rt = graph.find(arg), graph.find(tid)
            us = graph.find(graph.undef_id(symbol.source))
            ut = graph.find(graph.undef_id(symbol.target))
            if graph.distinct_roots(ra, us) and not graph.distinct_roots(rt, ut):
                graph.diseqs.append((tid, ut))
                added = True
            elif graph.distinct_roots(rt, ut) and not graph.distinct_roots(ra, us):
                graph.diseqs.append((arg, us))
                added = True
        if not added:
            return True


def _finite_allowed(graph: EGraph, root: int) -> Optional[FrozenSet[str]]:
    allowed = graph._class_allowed(root)
    if allowed is not None:
        return allowed
    # open sorts restricted by an explicit membership
    restrictions = [values for tid, values in graph.allowed.items() if graph.find(tid) == root]
    if not restrictions:
        return None
    result = frozenset.intersection(*restrictions)
    for tid, values in graph.forbidden.items():
        if graph.find(tid) == root:
            result -= values
    return result


def _cover(elim: FrozenSet[Var], literals: List[Literal], sig: Signature, out: List[Cube]) -> None:
    original: Set[Term] = {t for lit in literals for t in literal_subterms(lit)}
    graph = build_egraph(literals, sig)
    if not saturate(graph) or not graph.check():
        return
    classes = graph.classes()
    reps: Dict[int, Term] = {}
    for root, members in classes.items():
        free = [graph.terms[m] for m in members
                if not _has_elim(graph.terms[m], elim) and not _undef_app(graph.terms[m])]
        if free:
            reps[root] = min(free, key=term_key)

    # eliminated arguments of functions must have a known undef status
    for tid, fn, arg in graph.apps:
        if fn[0] != "app":
            continue
        symbol = sig.functions.get(fn[1])
        root = graph.find(arg)
        if symbol is None or symbol.injective or root in reps:
            continue
        if not any(graph.terms[m] in original for m in classes[graph.find(tid)]):
            continue
        nothing = graph.undef_id(symbol.source)
        if graph.find(nothing) == root or graph.distinct_roots(root, graph.find(nothing)):
            continue
        t = graph.terms[arg]
        _cover(elim, literals + [eq(t, undef(t.sort))], sig, out)
        _cover(elim, literals + [neq(t, undef(t.sort))], sig, out)
        return

    for root in sorted((r for r in classes if r not in reps), key=lambda r: term_key(graph.terms[r])):
        allowed = _finite_allowed(graph, root)
        if allowed is None:
            continue
        neighbours = set()
        for a, b in graph.diseqs:
            ra, rb = graph.find(a), graph.find(b)
            other = rb if ra == root else ra if rb == root else None
            if other is not None and other != root and other not in graph.const:
                neighbours.add(other)
        if len(allowed) > len(neighbours):
            continue
        t = graph.terms[root]
        for value in sorted(allowed):
            _cover(elim, literals + [eq(t, Const(value, t.sort))], sig, out)
        return

    cube = Cube.of(_project(graph, classes, reps, elim, original))
    if cube is not None:
        out.append(cube)


def _project(graph: EGraph, classes: Dict[int, List[int]], reps: Dict[int, Term],
             elim: FrozenSet[Var], original: Set[Term]) -> List[Literal]:
    lits: List[Literal] = []
    for root, rep in reps.items():
        members = [graph.terms[m] for m in classes[root]]
        keeps_elim = any(t in original and _has_elim(t, elim) for t in members)
        for t in members:
            if t == rep or _has_elim(t, elim) or _undef_app(t):
                continue
            if t in original or keeps_elim:
                lits.append(eq(rep, t))
    for a, b in graph.diseqs:
        ra, rb = graph.find(a), graph.find(b)
        if ra in reps and rb in reps and not (ra in graph.const and rb in graph.const):
            lits.append(neq(reps[ra], reps[rb]))
    for tid, values in graph.allowed.items():
        root = graph.find(tid)
        if root in reps and root not in graph.const:
            lits.append(mem(reps[root], values))
    for tid, values in graph.forbidden.items():
        root = graph.find(tid)
        if root in reps and root not in graph.const:
            lits.append(not_mem(reps[root], values))
    return list(dict.fromkeys(lits))


__all__ = ["qe_cover", "saturate"]
