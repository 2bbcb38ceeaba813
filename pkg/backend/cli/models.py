"""
Pydantic models for run configuration, reports and benchmark suites
"""
from pydantic import BaseModel, Field, field_validator
from typing import Optional, List
from datetime import datetime
from enum import Enum

from backend.config import (
    MAX_NODES, MAX_SECONDS, SOLVER_TIMEOUT_MS, ORACLE_MAX_CASES, ORACLE_MAX_ROWS,
    ORACLE_MAX_STEPS, ORACLE_FRESH_VALUES, ORACLE_CATALOG_SIZE, ORACLE_MAX_STATES,
)


class Verdict(str, Enum):
    """Outcome of a verification run"""
    SAFE = "SAFE"
    UNSAFE = "UNSAFE"
    UNKNOWN = "UNKNOWN"


class RunStatus(str, Enum):
    """Run processing status"""
    PENDING = "pending"
    PROCESSING = "processing"
    COMPLETED = "completed"
    FAILED = "failed"


class InsertionSemantics(str, Enum):
    MULTISET = "multiset"
    SET = "set"


class Backend(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class LogEntry(BaseModel):
    """Log entry captured during a run"""
    timestamp: str = Field(..., description="ISO timestamp of log entry")
    level: str = Field(..., description="Log level (INFO, WARNING, ERROR)")
    message: str = Field(..., description="Log message")


class ModeSettings(BaseModel):
    """Verification mode: case bound, repository bound and insertion semantics"""
    case_bound: Optional[int] = Field(default=None, ge=1, description="Max number of cases; None = unbounded")
    repo_bound: Optional[int] = Field(default=None, ge=1, description="Max tuples per repository relation")
    insertion: InsertionSemantics = Field(default=InsertionSemantics.MULTISET)

    def describe(self) -> str:
        cases = self.case_bound if self.case_bound is not None else "unbounded"
        repo = self.repo_bound if self.repo_bound is not None else "unbounded"
        return f"cases={cases}, repo={repo}, insertion={self.insertion.value}"


class OracleSettings(BaseModel):
    max_cases: int = Field(default=ORACLE_MAX_CASES, ge=0)
    max_rows: int = Field(default=ORACLE_MAX_ROWS, ge=0)
    max_steps: int = Field(default=ORACLE_MAX_STEPS, ge=0)
    fresh_values: int = Field(default=ORACLE_FRESH_VALUES, ge=0)
    catalog_size: int = Field(default=ORACLE_CATALOG_SIZE, ge=0)
    max_states: int = Field(default=ORACLE_MAX_STATES, ge=1)


class RunConfig(BaseModel):
    """Validated configuration handed from the command line to the services"""
    model_path: str = Field(..., description="Path to the .dab model")
    property_path: Optional[str] = Field(default=None, description="Path to the .prop file")
    mode: ModeSettings = Field(default_factory=ModeSettings)
    backend: Backend = Field(default=Backend.INTERNAL)
    solver_command: Optional[str] = Field(default=None, description="External solver command line")
    timeout_ms: int = Field(default=SOLVER_TIMEOUT_MS, ge=1)
    max_nodes: int = Field(default=MAX_NODES, ge=1)
    max_seconds: float = Field(default=MAX_SECONDS, gt=0)
    audit: bool = Field(default=False, description="Re-check the fixpoint after a SAFE verdict")
    cross_check: Optional[str] = Field(default=None, description="Solver command re-deciding every logged obligation")
    replay: bool = Field(default=True, description="Replay UNSAFE traces through the oracle")
    oracle: OracleSettings = Field(default_factory=OracleSettings)
    trace_out: Optional[str] = None
    tree_out: Optional[str] = None


class MetricsReport(BaseModel):
    nodes: int = Field(default=0, ge=0)
    depth: int = Field(default=0, ge=0)
    solver_calls: int = Field(default=0, ge=0)
    seconds: float = Field(default=0.0, ge=0)


class VerificationReport(BaseModel):
    """Result of one verification run"""
    run_id: str = Field(..., description="Unique run identifier")
    model: str
    property: str
    mode: str
    status: RunStatus = Field(default=RunStatus.PENDING)
    verdict: Optional[Verdict] = None
    metrics: MetricsReport = Field(default_factory=MetricsReport)
    trace: List[str] = Field(default=[], description="Transition names, forward order")
    replay_confirmed: Optional[bool] = None
    witness: Optional[str] = Field(None, description="Rendered concrete witness run")
    reason: Optional[str] = Field(None, description="Why the verdict is UNKNOWN")
    audit_ok: Optional[bool] = None
    cross_check: Optional[str] = Field(None, description="Backend agreement: ok, disagreements, or skipped")
    created_at: datetime = Field(default_factory=datetime.now)
    completed_at: Optional[datetime] = None
    error: Optional[str] = Field(None, description="Error message if failed")
    logs: List[LogEntry] = Field(default=[], description="Captured log messages")


class UpdateSpecDiagnostic(BaseModel):
    spec: str
    kind: str
    passed: bool
    failed_bullets: List[str] = Field(default=[])


class ClassificationReport(BaseModel):
    model: str
    mode: str
    acyclic: bool
    case_identifier_agnostic: bool
    sound_complete: bool
    sound_complete_reason: str
    termination: str
    termination_reason: str
    theorems: List[str] = Field(default=[])
    diagnostics: List[UpdateSpecDiagnostic] = Field(default=[])


class SuiteEntry(BaseModel):
    """One benchmark: model, property, mode and the expected verdict"""
    name: str
    model: str = Field(..., description="Model file, relative to data/models")
    property: str = Field(..., description="Property file, relative to data/properties")
    mode: ModeSettings = Field(default_factory=ModeSettings)
    expected: Verdict
    max_seconds: Optional[float] = Field(default=None, gt=0, description="Time cap for this entry; None = run default")

    @field_validator("name")
    @classmethod
    def name_not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("benchmark name must not be blank")
        return value


class Suite(BaseModel):
    name: str
    description: str = ""
    entries: List[SuiteEntry]


class BenchRow(BaseModel):
    name: str
    expected: Verdict
    verdict: Optional[Verdict] = None
    matches: bool = False
    metrics: MetricsReport = Field(default_factory=MetricsReport)
    error: Optional[str] = None
