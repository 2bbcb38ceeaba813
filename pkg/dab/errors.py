"""
Exception hierarchy for the DAB verifier.

Validation problems are reported as data (see ``dab.model.ValidationReport``);
the classes below are reserved for faults that stop an operation.
"""
from typing import Optional


class DabError(Exception):
    """Base class for every error raised by the verifier"""


class ParseError(DabError):
    """Syntax error in a model, property or catalog document"""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.reason = message
        self.line = line
        self.column = column


class ArityMismatch(DabError):
    """Relational atom with the wrong number of terms"""


class NonGroundInput(DabError):
    """Solver input that still contains quantifiers or lambda updates"""


class SolverUnavailable(DabError):
    """External solver binary missing or not configured"""


class SolverProtocolError(DabError):
    """External solver answered something other than sat/unsat/unknown"""


class SolverTimeout(DabError):
    """External solver exceeded its wall-clock budget"""


class CyclicSignature(DabError):
    """Quantifier elimination refused because the function graph has a cycle"""


class IllTypedEffect(DabError):
    """Effect rule that does not type-check against the data schema"""


class TooManyIndexes(DabError):
    """Property mentions more cases than the case bound allows"""


class UnsupportedCombination(DabError):
    """Model feature that cannot be encoded in the requested mode"""


class ResourceLimit(DabError):
    """Node or time cap reached during backward search"""


class BoundsTooSmall(DabError):
    """Bounded oracle search exhausted its caps before reaching a conclusion"""


class InconsistentSnapshot(DabError):
    """Snapshot violating the oracle's structural invariants"""


class UnassignedFreeVariable(DabError):
    """Formula evaluated with a free variable missing from the assignment"""

    def __init__(self, name: str):
        super().__init__(f"No value assigned to free variable '{name}'")
        self.name = name


class ModelInvalid(DabError):
    """Command needs a valid model but validation reported errors"""

    def __init__(self, message: str, violations: Optional[list] = None):
        super().__init__(message)
        self.violations = violations or []
