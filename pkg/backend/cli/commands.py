"""
Sub-command implementations; each returns the process exit code
"""
import logging
import sys
from argparse import Namespace
from pathlib import Path

from pydantic import ValidationError

from backend.cli.models import (
    Backend, InsertionSemantics, ModeSettings, OracleSettings, RunConfig, RunStatus, Verdict,
)
from backend.config import SMT_SOLVER, DEFAULT_JOBS
from backend.services.bench_service import BenchService, load_suite, render_table
from backend.services.verification_service import validate_file, verification_service
from dab.errors import DabError, ModelInvalid
from dab.oracle import Witness

logger = logging.getLogger(__name__)

EXIT_CODES = {Verdict.SAFE: 0, Verdict.UNSAFE: 1, Verdict.UNKNOWN: 3}
EXIT_ERROR = 2


def fail(message: str) -> int:
    print(f"ERROR: {message}", file=sys.stderr)
    return EXIT_ERROR


def mode_settings(args: Namespace) -> ModeSettings:
    return ModeSettings(
        case_bound=getattr(args, "case_bound", None),
        repo_bound=getattr(args, "repo_bound", None),
        insertion=InsertionSemantics(getattr(args, "insertion", "multiset")),
    )


def oracle_settings(args: Namespace) -> OracleSettings:
    overrides = {}
    for name in ("max_cases", "max_rows", "max_steps", "fresh_values", "catalog_size"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "fresh", None) is not None:
        overrides["fresh_values"] = args.fresh
    return OracleSettings(**overrides)


def run_config(args: Namespace) -> RunConfig:
    """Command-line flags override the environment defaults"""
    command = getattr(args, "solver", None) or SMT_SOLVER
    backend = Backend(getattr(args, "backend", None) or (Backend.EXTERNAL.value if command else Backend.INTERNAL.value))
    values = dict(
        model_path=args.model,
        property_path=getattr(args, "property", None),
        mode=mode_settings(args),
        backend=backend,
        solver_command=command,
        audit=getattr(args, "audit", False),
        cross_check=getattr(args, "cross_check", None),
        replay=getattr(args, "replay", True),
        oracle=oracle_settings(args),
        trace_out=getattr(args, "trace_out", None),
        tree_out=getattr(args, "tree_out", None),
    )
    for name in ("timeout_ms", "max_nodes", "max_seconds"):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return RunConfig(**values)


def guarded(command):
    """Map library and configuration errors to exit code 2"""
    def wrapper(args: Namespace) -> int:
        try:
            return command(args)
        except ModelInvalid as e:
            for violation in e.violations:
                print(f"  {violation}", file=sys.stderr)
            return fail(str(e))
        except (DabError, FileNotFoundError, ValueError, ValidationError) as e:
            return fail(str(e))
    wrapper.__name__ = command.__name__
    wrapper.__doc__ = command.__doc__
    return wrapper


@guarded
def cmd_validate(args: Namespace) -> int:
    """Validate a model; 0 when no errors, 1 when errors were found"""
    _, report = validate_file(args.model)
    for violation in report.violations:
        print(violation)
    if report.ok:
        print(f"OK ({len(report.warnings)} warning(s))")
        return 0
    print(f"INVALID ({len(report.errors)} error(s))")
    return 1


@guarded
def cmd_classify(args: Namespace) -> int:
    report = verification_service.classify(args.model, mode_settings(args))
    print(f"acyclic catalog:          {report.acyclic}")
    print(f"case-identifier agnostic: {report.case_identifier_agnostic}")
    print(f"sound and complete:       {report.sound_complete} ({report.sound_complete_reason})")
    print(f"termination:              {report.termination} ({report.termination_reason})")
    for d in report.diagnostics:
        status = "ok" if d.passed else "FAIL"
        print(f"  {d.spec} [{d.kind}]: {status}")
        for bullet in d.failed_bullets:
            print(f"    - {bullet}")
    if args.report:
        Path(args.report).write_text(report.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Classification report written to {args.report}")
    return 0


@guarded
def cmd_translate(args: Namespace) -> int:
    text = verification_service.translate(args.model, mode_settings(args), args.emit)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        logger.info(f"Artifact system written to {args.output}")
    else:
        print(text, end="")
    return 0


@guarded
def cmd_verify(args: Namespace) -> int:
    """SAFE 0, UNSAFE 1, UNKNOWN 3, errors 2"""
    cfg = run_config(args)
    run_id = verification_service.create_run(cfg)
    report = verification_service.process_run(run_id)
    if report.status == RunStatus.FAILED:
        return fail(report.error or "verification failed")
    print(report.verdict.value)
    metrics = report.metrics
    print(f"NODES={metrics.nodes}")
    print(f"DEPTH={metrics.depth}")
    print(f"SOLVER_CALLS={metrics.solver_calls}")
    print(f"SECONDS={metrics.seconds:.3f}")
    if report.reason:
        print(f"REASON={report.reason}")
    if report.audit_ok is not None:
        print(f"AUDIT={'ok' if report.audit_ok else 'failed'}")
    if report.cross_check is not None:
        print(f"CROSS_CHECK={report.cross_check}")
    if report.verdict == Verdict.UNSAFE:
        print("TRACE:")
        for k, name in enumerate(report.trace, start=1):
            print(f"  {k}. {name}")
        if report.replay_confirmed is not None:
            print(f"REPLAY={'confirmed' if report.replay_confirmed else 'failed'}")
        if report.witness:
            print(report.witness)
    return EXIT_CODES[report.verdict]


@guarded
def cmd_simulate(args: Namespace) -> int:
    """1 when a witness run was found, 0 otherwise"""
    outcome = verification_service.simulate(args.model, args.catalog, args.property, oracle_settings(args),
                                            getattr(args, "insertion", "multiset"))
    if isinstance(outcome, Witness):
        print("WITNESS")
        print(outcome.render())
        return 1
    suffix = " (bounds reached)" if outcome.truncated else ""
    print(f"NOT FOUND after {outcome.states} snapshot(s){suffix}")
    return 0


@guarded
def cmd_bench(args: Namespace) -> int:
    """0 iff every verdict matches the suite"""
    suite = load_suite(args.suite)
    base = run_config(Namespace(**{**vars(args), "model": "", "property": None}))
    rows = BenchService().run_suite(suite, base, args.jobs or DEFAULT_JOBS)
    print(render_table(rows))
    return 0 if all(row.matches for row in rows) else 1


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "translate": cmd_translate,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}
