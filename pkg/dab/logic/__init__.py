"""Equational logic core: terms, decision procedures, quantifier elimination and evaluation."""
from dab.logic.backends import EXTERNAL, INTERNAL, SolverBackend, entails, formula_cubes, is_sat
from dab.logic.evaluate import FiniteStructure, evaluate, exists_in_extension, structures
from dab.logic.qe import qe_cover
from dab.logic.smtlib import check_external, emit_smtlib
from dab.logic.solver import Obligation, check_obligation, is_sat_internal
from dab.logic.terms import *  # noqa: F401,F403
from dab.logic.terms import __all__ as _terms_all

__all__ = list(_terms_all) + [
    "EXTERNAL", "INTERNAL", "SolverBackend", "entails", "formula_cubes", "is_sat",
    "FiniteStructure", "evaluate", "exists_in_extension", "structures", "qe_cover",
    "check_external", "emit_smtlib", "Obligation", "check_obligation", "is_sat_internal",
]
