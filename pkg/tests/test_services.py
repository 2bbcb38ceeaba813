import pytest
from pydantic import ValidationError

from backend.cli.models import Backend, ModeSettings, RunConfig, RunStatus, Suite, Verdict
from backend.config import SUITES_DIR
from backend.services.bench_service import BenchService, load_suite, render_table, suite_path
from backend.services.verification_service import VerificationService
from tests.conftest import REQUEST_MODEL


@pytest.fixture
def request_config(tmp_path):
    model = tmp_path / "request.dab"
    model.write_text(REQUEST_MODEL, encoding="utf-8")
    completed = tmp_path / "completed.prop"
    completed.write_text("property { i: Request = completed; }", encoding="utf-8")
    return RunConfig(model_path=str(model), property_path=str(completed), mode=ModeSettings(case_bound=1),
                     backend=Backend.INTERNAL)


class TestVerificationService:

    @staticmethod
    def test_run_lifecycle(request_config):
        service = VerificationService()
        run_id = service.create_run(request_config)
        assert service.get_run(run_id).status == RunStatus.PENDING
        report = service.process_run(run_id)
        assert report.status == RunStatus.COMPLETED
        assert report.verdict == Verdict.UNSAFE
        assert report.replay_confirmed is True
        assert report.witness.startswith("catalog: ")
        assert report.completed_at is not None
        messages = [entry.message for entry in report.logs]
        assert any("completed: UNSAFE" in m for m in messages)
        assert not any(m.startswith("Expanding node") for m in messages)
        assert service.get_run_logs(run_id)

    @staticmethod
    def test_missing_property_fails_the_run(request_config):
        service = VerificationService()
        run_id = service.create_run(request_config.model_copy(update={"property_path": None}))
        report = service.process_run(run_id, capture_logs=False)
        assert report.status == RunStatus.FAILED
        assert report.verdict is None
        assert report.error == "ValueError: verification needs a property file"

    @staticmethod
    def test_unknown_emission(request_config):
        with pytest.raises(ValueError, match="unknown emission format"):
            VerificationService().translate(request_config.model_path, ModeSettings(), "dot")


class TestSuites:

    @staticmethod
    def test_shipped_suite():
        suite = load_suite("hiring")
        assert suite_path("hiring") == SUITES_DIR / "hiring.json"
        assert len(suite.entries) == 4
        assert all(entry.mode.case_bound == 1 for entry in suite.entries)
        assert all(entry.max_seconds == 120 for entry in suite.entries)
        expected = [entry.expected for entry in suite.entries]
        assert expected.count(Verdict.SAFE) >= 1
        assert expected.count(Verdict.UNSAFE) >= 3

    @staticmethod
    def test_extended_suite():
        suite = load_suite("hiring_extended")
        assert [entry.name for entry in suite.entries] == ["ineligible_after_marking", "qualified_evaluated"]
        assert all(entry.max_seconds is None for entry in suite.entries)

    @staticmethod
    def test_entry_time_cap(request_config):
        entry = load_suite("hiring").entries[0]
        assert BenchService().entry_config(entry, request_config).max_seconds == 120
        tight = request_config.model_copy(update={"max_seconds": 5.0})
        assert BenchService().entry_config(entry, tight).max_seconds == 5.0

    @staticmethod
    def test_rejects_bad_mode():
        with pytest.raises(ValidationError):
            Suite.model_validate({"name": "bad", "entries": [
                {"name": "x", "model": "m.dab", "property": "p.prop", "mode": {"case_bound": 0}, "expected": "SAFE"},
            ]})

    @staticmethod
    @pytest.mark.slow
    def test_entry_paths_and_table(request_config):
        suite = load_suite("hiring")
        bench = BenchService()
        cfg = bench.entry_config(suite.entries[0], request_config)
        assert cfg.model_path.endswith("hiring.dab")
        assert cfg.mode.case_bound == 1
        row = bench.run_entry(suite.entries[0], request_config.model_copy(update={"replay": False}))
        assert row.matches
        table = render_table([row]).splitlines()
        assert table[0].startswith("name")
        assert table[2].startswith("hiring_completed")
        assert "mismatch" not in table[2]
