"""
Benchmark Service

Runs a suite of (model, property, mode, expected verdict) entries with a
bounded thread pool and compares the verdicts.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

from backend.cli.models import BenchRow, RunConfig, RunStatus, Suite, SuiteEntry
from backend.config import MODELS_DIR, PROPERTIES_DIR, SUITES_DIR, DEFAULT_JOBS
from backend.services.verification_service import VerificationService, read_text

logger = logging.getLogger(__name__)


def suite_path(name: str) -> Path:
    """Suite names resolve against data/suites; explicit paths are used as given"""
    candidate = Path(name)
    if candidate.suffix == ".json" and candidate.exists():
        return candidate
    return SUITES_DIR / f"{name}.json"


def load_suite(name: str) -> Suite:
    return Suite.model_validate_json(read_text(suite_path(name)))


class BenchService:
    """Service for running benchmark suites"""

    def __init__(self, service: Optional[VerificationService] = None):
        self.service = service or VerificationService()

    def entry_config(self, entry: SuiteEntry, base: RunConfig) -> RunConfig:
        update = {
            "model_path": str(MODELS_DIR / entry.model),
            "property_path": str(PROPERTIES_DIR / entry.property),
            "mode": entry.mode,
            "trace_out": None,
            "tree_out": None,
        }
        if entry.max_seconds is not None:
            update["max_seconds"] = min(entry.max_seconds, base.max_seconds)
        return base.model_copy(update=update)

    def run_entry(self, entry: SuiteEntry, base: RunConfig) -> BenchRow:
        run_id = self.service.create_run(self.entry_config(entry, base))
        report = self.service.process_run(run_id, capture_logs=False)
        row = BenchRow(name=entry.name, expected=entry.expected, verdict=report.verdict,
                       metrics=report.metrics, error=report.error)
        row.matches = report.status == RunStatus.COMPLETED and report.verdict == entry.expected
        marker = "✅" if row.matches else "❌"
        got = report.verdict.value if report.verdict else "ERROR"
        logger.info(f"{marker} {entry.name}: expected {entry.expected.value}, got {got}")
        return row

    def run_suite(self, suite: Suite, base: RunConfig, jobs: int = DEFAULT_JOBS) -> List[BenchRow]:
        logger.info(f"Running suite {suite.name}: {len(suite.entries)} entries, {jobs} worker(s)")
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            rows = list(pool.map(lambda entry: self.run_entry(entry, base), suite.entries))
        matched = sum(row.matches for row in rows)
        logger.info(f"Suite {suite.name}: {matched}/{len(rows)} verdicts match")
        return rows


def render_table(rows: List[BenchRow]) -> str:
    header = f"{'name':<32} {'expected':<8} {'verdict':<8} {'nodes':>7} {'depth':>5} {'calls':>7} {'seconds':>8}"
    lines = [header, "-" * len(header)]
    for row in rows:
        verdict = row.verdict.value if row.verdict else "ERROR"
        flag = "" if row.matches else "  <-- mismatch"
        lines.append(f"{row.name:<32} {row.expected.value:<8} {verdict:<8} {row.metrics.nodes:>7} "
                     f"{row.metrics.depth:>5} {row.metrics.solver_calls:>7} {row.metrics.seconds:>8.2f}{flag}")
    return "\n".join(lines)
