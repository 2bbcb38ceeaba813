"""
Verification Service

Loads models, runs classification, translation and backward reachability,
and keeps per-run bookkeeping (status, captured logs, results).
"""
import uuid
import logging
from pathlib import Path
from datetime import datetime
from typing import Dict, Optional, List, Tuple, Union

from backend.cli.models import (
    Backend, ClassificationReport, MetricsReport, ModeSettings, OracleSettings, RunConfig, RunStatus,
    UpdateSpecDiagnostic, Verdict, VerificationReport, LogEntry,
)
from backend.services.log_handler import LogCaptureHandler
from dab.checks import VerificationMode, classify
from dab.engine import EngineConfig, ReachabilityResult, backward_reachability, dump_tree
from dab.errors import BoundsTooSmall, DabError, ModelInvalid, SolverUnavailable
from dab.model import DabModel, Property, ValidationReport, validate_dab, validate_property
from dab.oracle import Bounds, CatalogInstance, NotFound, Witness, bounded_reach, replay_trace
from dab.parser import parse_facts, parse_model, parse_property
from dab.translate import emit_arts, emit_mcmt_like, translate, translate_property, validate_shape

logger = logging.getLogger(__name__)

EMITTERS = {"arts": emit_arts, "mcmt-like": emit_mcmt_like}


def read_text(path: Union[str, Path]) -> str:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    return path.read_text(encoding="utf-8")


def to_mode(settings: ModeSettings) -> VerificationMode:
    return VerificationMode(settings.case_bound, settings.repo_bound, settings.insertion.value)


def to_bounds(settings: OracleSettings) -> Bounds:
    return Bounds(settings.max_cases, settings.max_rows, settings.max_steps, settings.fresh_values,
                  settings.max_states)


def engine_config(cfg: RunConfig) -> EngineConfig:
    return EngineConfig(
        max_nodes=cfg.max_nodes,
        max_seconds=cfg.max_seconds,
        audit=cfg.audit,
        backend=cfg.backend.value,
        solver_command=cfg.solver_command,
        timeout_ms=cfg.timeout_ms,
        record_obligations=cfg.cross_check is not None,
    )


def validate_file(path: Union[str, Path]) -> Tuple[Optional[DabModel], ValidationReport]:
    """Parse and validate a model file; parse errors propagate"""
    m = parse_model(read_text(path))
    return m, validate_dab(m)


def load_model(path: Union[str, Path]) -> DabModel:
    m, report = validate_file(path)
    if not report.ok:
        raise ModelInvalid(f"{path}: {len(report.errors)} validation error(s)", list(report.errors))
    for warning in report.warnings:
        logger.warning(f"[WARN] {warning}")
    return m


def load_property(path: Union[str, Path], m: DabModel) -> Property:
    p = parse_property(read_text(path), m)
    report = validate_property(p, m)
    if not report.ok:
        raise ModelInvalid(f"{path}: {len(report.errors)} property error(s)", list(report.errors))
    for warning in report.warnings:
        logger.warning(f"[WARN] {warning}")
    return p


def load_catalog(path: Union[str, Path], m: DabModel) -> CatalogInstance:
    return CatalogInstance.from_facts(parse_facts(read_text(path)), m.data)


class VerificationService:
    """Service for managing verification runs"""

    def __init__(self):
        self.runs: Dict[str, VerificationReport] = {}  # In-memory run storage
        self.configs: Dict[str, RunConfig] = {}
        self.logs: Dict[str, List[dict]] = {}  # In-memory log storage
        self.results: Dict[str, ReachabilityResult] = {}

    # -- single-shot commands -----------------------------------------------

    def classify(self, model_path: str, mode: ModeSettings) -> ClassificationReport:
        m = load_model(model_path)
        c = classify(m, to_mode(mode))
        diagnostics = [
            UpdateSpecDiagnostic(spec=d.spec, kind=d.kind, passed=d.passed,
                                 failed_bullets=[f"{b.bullet}: {b.detail}" for b in d.checks if not b.passed])
            for d in c.diagnostics
        ]
        return ClassificationReport(
            model=m.root.name,
            mode=mode.describe(),
            acyclic=c.acyclic,
            case_identifier_agnostic=c.agnostic,
            sound_complete=c.sound_complete is not None,
            sound_complete_reason=c.sound_complete_reason,
            termination=c.termination or "none",
            termination_reason=c.termination_reason,
            theorems=[name for name, applies in c.theorems if applies],
            diagnostics=diagnostics,
        )

    def translate(self, model_path: str, mode: ModeSettings, emit: str = "arts") -> str:
        if emit not in EMITTERS:
            raise ValueError(f"unknown emission format {emit}; expected one of {', '.join(EMITTERS)}")
        m = load_model(model_path)
        system = translate(m, to_mode(mode))
        problems = validate_shape(system)
        for problem in problems:
            logger.error(f"❌ {problem}")
        if problems:
            raise DabError(f"translated system is malformed ({len(problems)} problem(s))")
        return EMITTERS[emit](system)

    def simulate(self, model_path: str, catalog_path: str, property_path: str,
                 bounds: OracleSettings, insertion: str = "multiset") -> Union[Witness, NotFound]:
        m = load_model(model_path)
        p = load_property(property_path, m)
        catalog = load_catalog(catalog_path, m)
        logger.info(f"Simulating {m.root.name} on a catalog of {catalog.size} row(s)")
        return bounded_reach(m, catalog, to_bounds(bounds), p, insertion)

    # -- verification runs ---------------------------------------------------

    def create_run(self, cfg: RunConfig) -> str:
        """Create a new verification run"""
        run_id = str(uuid.uuid4())
        self.runs[run_id] = VerificationReport(
            run_id=run_id,
            model=cfg.model_path,
            property=cfg.property_path or "",
            mode=cfg.mode.describe(),
        )
        self.configs[run_id] = cfg
        logger.info(f"Created run {run_id} for {Path(cfg.model_path).name}")
        return run_id

    def get_run(self, run_id: str) -> Optional[VerificationReport]:
        return self.runs.get(run_id)

    def get_run_logs(self, run_id: str) -> List[dict]:
        return self.logs.get(run_id, [])

    def process_run(self, run_id: str, capture_logs: bool = True) -> VerificationReport:
        """Run one verification; failures are recorded on the report"""
        report = self.runs[run_id]
        cfg = self.configs[run_id]

        log_handler = LogCaptureHandler(run_id, self.logs)
        log_handler.setLevel(logging.INFO)
        root_logger = logging.getLogger()
        if capture_logs:
            root_logger.addHandler(log_handler)

        try:
            report.status = RunStatus.PROCESSING
            logger.info(f"Processing run {run_id} ({report.mode})")
            self._run_verify(run_id, cfg, report)
            report.status = RunStatus.COMPLETED
            logger.info(f"✅ Run {run_id} completed: {report.verdict.value}")

        except DabError as e:
            logger.error(f"❌ Run {run_id} failed: {e}")
            report.status = RunStatus.FAILED
            report.error = str(e)

        except Exception as e:
            logger.error(f"❌ Run {run_id} failed: {e}", exc_info=True)
            report.status = RunStatus.FAILED
            report.error = f"{type(e).__name__}: {e}"

        finally:
            report.completed_at = datetime.now()
            root_logger.removeHandler(log_handler)
            report.logs = [LogEntry(**entry) for entry in self.logs.get(run_id, [])]

        return report

    def _run_verify(self, run_id: str, cfg: RunConfig, report: VerificationReport) -> None:
        if cfg.property_path is None:
            raise ValueError("verification needs a property file")
        m = load_model(cfg.model_path)
        p = load_property(cfg.property_path, m)
        mode = to_mode(cfg.mode)
        if cfg.backend == Backend.EXTERNAL and not cfg.solver_command:
            logger.info("External backend without a command: using the default z3 invocation")

        system = translate(m, mode)
        unsafe = translate_property(p, m, mode)
        result = backward_reachability(system, unsafe, engine_config(cfg))
        self.results[run_id] = result

        report.verdict = Verdict(result.verdict)
        report.metrics = MetricsReport(nodes=result.metrics.nodes, depth=result.metrics.depth,
                                       solver_calls=result.metrics.solver_calls,
                                       seconds=round(result.metrics.seconds, 3))
        report.trace = list(result.trace)
        report.reason = result.reason or None
        report.audit_ok = result.audit_ok
        if cfg.cross_check is not None:
            report.cross_check = self._cross_check(result, cfg.cross_check)
        if cfg.tree_out:
            Path(cfg.tree_out).write_text(dump_tree(result), encoding="utf-8")
            logger.info(f"Proof tree written to {cfg.tree_out}")
        if cfg.trace_out and result.verdict == Verdict.UNSAFE.value:
            Path(cfg.trace_out).write_text("\n".join(result.trace) + "\n", encoding="utf-8")
            logger.info(f"Trace written to {cfg.trace_out}")

        if result.verdict == Verdict.UNSAFE.value and cfg.replay:
            try:
                replay = replay_trace(m, mode, result.trace, to_bounds(cfg.oracle), p,
                                      size_bound=cfg.oracle.catalog_size)
                report.replay_confirmed = replay.confirmed
                if replay.witness is not None:
                    report.witness = replay.witness.render()
                else:
                    logger.warning(f"[WARN] Replay failed at step {replay.failed_step}")
            except BoundsTooSmall as e:
                logger.warning(f"[WARN] Replay inconclusive: {e}")


    def _cross_check(self, result: ReachabilityResult, command: str) -> str:
        log = result.backend.log
        try:
            disagreements = result.backend.cross_check(command)
        except SolverUnavailable as e:
            logger.warning(f"[WARN] Cross-check skipped: {e}")
            return f"skipped ({e})"
        if disagreements:
            logger.error(f"❌ {len(disagreements)} of {len(log)} obligation(s) decided differently by {command}")
            return f"{len(disagreements)} disagreement(s) in {len(log)} obligation(s)"
        logger.info(f"✅ {command} agrees on all {len(log)} obligation(s)")
        return f"ok ({len(log)} obligation(s))"

# Global service instance
verification_service = VerificationService()
