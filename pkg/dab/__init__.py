"""
Verification library for data-aware BPMN processes.

Models are parsed from the structured text format (``dab.parser``), validated
(``dab.model``), classified (``dab.checks``), translated into array-based
artifact systems (``dab.translate``) and checked by backward reachability
(``dab.engine``). ``dab.oracle`` runs bounded forward search over concrete
snapshots and replays counterexample traces.
"""
from dab.checks import VerificationMode, classify
from dab.engine import EngineConfig, ReachabilityResult, backward_reachability
from dab.errors import DabError, ParseError
from dab.model import DabModel, Property, validate_dab, validate_property
from dab.oracle import Bounds, CatalogInstance, bounded_reach, replay_trace
from dab.parser import parse_facts, parse_model, parse_property, render_model
from dab.translate import translate, translate_property

__version__ = "1.0.0"

__all__ = [
    "VerificationMode", "classify", "EngineConfig", "ReachabilityResult", "backward_reachability",
    "DabError", "ParseError", "DabModel", "Property", "validate_dab", "validate_property",
    "Bounds", "CatalogInstance", "bounded_reach", "replay_trace",
    "parse_facts", "parse_model", "parse_property", "render_model", "translate", "translate_property",
]
