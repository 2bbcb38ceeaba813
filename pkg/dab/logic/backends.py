"""
Satisfiability and entailment dispatch with call accounting.

A ``SolverBackend`` is confined to one verification run. Entailment between
state formulas is reduced to one ground obligation per cube: the negated
right-hand side is universally quantified over indexes, so its index
variables are instantiated over the index terms of the left-hand cube plus
one fresh index per sort.
"""
import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

from dab.logic.smtlib import IN_PROCESS, check_external, emit_smtlib
from dab.logic.solver import Obligation, build_egraph, check_obligation
from dab.logic.terms import (
    Const, Cube, Eq, Formula, Literal, Mem, Signature, StateFormula, StateVar, Term, Var,
    literal_terms, negate, rewrite_catalog_atoms, subst_literal, to_cubes, trivial,
)

logger = logging.getLogger(__name__)

INTERNAL = "internal"
EXTERNAL = "external"


class SolverBackend:
    """Decides obligations with the internal procedure or an external SMT solver"""

    def __init__(self, sig: Signature, kind: str = INTERNAL, command: Optional[str] = None,
                 timeout_ms: int = 10000, record: bool = False):
        if kind not in (INTERNAL, EXTERNAL):
            raise ValueError(f"unknown backend {kind}")
        self.sig = sig
        self.kind = kind
        self.command = command
        self.timeout_ms = timeout_ms
        self.calls = 0
        self.record = record
        self.log: List[Tuple[Obligation, bool]] = []

    def check(self, ob: Obligation) -> bool:
        self.calls += 1
        if self.kind == EXTERNAL:
            verdict = check_external(emit_smtlib(ob, self.sig), self.command, self.timeout_ms)
        else:
            verdict = check_obligation(ob, self.sig)
        if self.record:
            self.log.append((ob, verdict))
        return verdict

    def is_sat(self, cube: Union[Cube, Sequence[Literal]]) -> bool:
        literals = tuple(cube.literals) if isinstance(cube, Cube) else tuple(cube)
        return self.check(Obligation(literals))

    def entails_cube(self, cube: Cube, targets: Sequence[Cube]) -> bool:
        """Whether ``cube`` implies the disjunction of ``targets``"""
        graph = build_egraph(cube.literals, self.sig)
        if not graph.propagate():
            return True
        known: Dict[StateVar, str] = {}
        for t in graph.terms:
            if isinstance(t, StateVar):
                value = graph.value(t)
                if value is not None:
                    known[t] = value
        pool: Dict[str, List[Term]] = {}
        for t in graph.terms:
            if isinstance(t, Var):
                pool.setdefault(t.sort, []).append(t)
        clauses: List[Tuple[Literal, ...]] = []
        for target in targets:
            if _contradicts(target, known):
                continue
            variables = sorted(target.variables(), key=lambda v: v.name)
            options = [pool.get(v.sort, []) + [Var(f"_fresh_{v.sort}", v.sort)] for v in variables]
            for combo in itertools.product(*options):
                mapping = dict(zip(variables, combo))
                clause: List[Literal] = []
                satisfied = False
                for lit in target.literals:
                    lit = subst_literal(lit, mapping)
                    value = trivial(lit)
                    if value is None:
                        value = graph.status(lit)
                    if value is False:
                        satisfied = True
                        break
                    if value is None:
                        clause.append(negate(lit))
                if satisfied:
                    continue
                if not clause:
                    return True
                clauses.append(tuple(clause))
        return not self.check(Obligation(tuple(cube.literals), tuple(clauses)))

    def entails(self, phi: StateFormula, psi: StateFormula) -> bool:
        return all(self.entails_cube(cube, psi) for cube in phi)

    def cross_check(self, command: str = IN_PROCESS) -> List[Obligation]:
        """Recorded obligations on which ``command`` disagrees with the verdict given during the run"""
        return cross_check(self.log, self.sig, command, self.timeout_ms)


def _contradicts(target: Cube, known: Dict[StateVar, str]) -> bool:
    for lit in target.literals:
        terms = literal_terms(lit)
        if isinstance(lit, Eq) and isinstance(terms[0], Const) and terms[1] in known:
            if known[terms[1]] != terms[0].name:
                return True
        elif isinstance(lit, Mem) and lit.term in known and known[lit.term] not in lit.values:
            return True
    return False


def cross_check(log: Sequence[Tuple[Obligation, bool]], sig: Signature, command: str = IN_PROCESS,
                timeout_ms: int = 10000) -> List[Obligation]:
    """Re-decide logged obligations; ``internal`` selects the built-in procedure"""
    disagreements = []
    for ob, verdict in log:
        if command == INTERNAL:
            other = check_obligation(ob, sig)
        else:
            other = check_external(emit_smtlib(ob, sig), command, timeout_ms)
        if other != verdict:
            logger.error(f"❌ Backends disagree on a {len(ob.cube)}-literal obligation: "
                         f"run said {verdict}, {command} says {other}")
            disagreements.append(ob)
    return disagreements


def formula_cubes(phi: Formula, sig: Signature) -> StateFormula:
    result = []
    for _, literals in to_cubes(rewrite_catalog_atoms(phi, sig)):
        cube = Cube.of(literals)
        if cube is not None:
            result.append(cube)
    return tuple(result)


def is_sat(phi: Formula, sig: Signature, backend: Optional[SolverBackend] = None) -> bool:
    """Satisfiability of a formula whose existentials are read as Skolem constants"""
    backend = backend or SolverBackend(sig)
    return any(backend.is_sat(cube) for cube in formula_cubes(phi, sig))


def entails(phi: StateFormula, psi: StateFormula, sig: Signature,
            backend: Optional[SolverBackend] = None) -> bool:
    backend = backend or SolverBackend(sig)
    return backend.entails(phi, psi)


__all__ = ["INTERNAL", "EXTERNAL", "SolverBackend", "cross_check", "formula_cubes", "is_sat", "entails"]
