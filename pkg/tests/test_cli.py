import json

import pytest

from backend.config import CATALOGS_DIR, MODELS_DIR, PROPERTIES_DIR
from backend.main import main
from tests.conftest import REQUEST_MODEL

HIRING = str(MODELS_DIR / "hiring.dab")


def prop(name: str) -> str:
    return str(PROPERTIES_DIR / f"{name}.prop")


@pytest.fixture
def request_files(tmp_path):
    model = tmp_path / "request.dab"
    model.write_text(REQUEST_MODEL, encoding="utf-8")
    completed = tmp_path / "completed.prop"
    completed.write_text("property { i: Request = completed; }", encoding="utf-8")
    unassigned = tmp_path / "unassigned.prop"
    unassigned.write_text("property { i: Decide = enabled and applicant = undef; }", encoding="utf-8")
    return str(model), str(completed), str(unassigned)


class TestValidate:

    @staticmethod
    def test_valid_model(capsys):
        assert main(["validate", HIRING]) == 0
        assert "OK (" in capsys.readouterr().out

    @staticmethod
    def test_invalid_model(capsys):
        assert main(["validate", str(MODELS_DIR / "broken.dab")]) == 1
        out = capsys.readouterr().out
        assert "ERROR DuplicateBlockName:" in out
        assert "INVALID (1 error(s))" in out

    @staticmethod
    def test_parse_error(tmp_path, capsys):
        bad = tmp_path / "bad.dab"
        bad.write_text("sorts { case jobId }", encoding="utf-8")
        assert main(["validate", str(bad)]) == 2
        assert capsys.readouterr().err.startswith("ERROR: ")

    @staticmethod
    def test_missing_file(tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.dab")]) == 2
        assert "File not found" in capsys.readouterr().err


class TestClassifyAndTranslate:

    @staticmethod
    def test_classify_report(tmp_path, capsys):
        report = tmp_path / "classification.json"
        assert main(["classify", HIRING, "--case-bound", "1", "--report", str(report)]) == 0
        assert "termination:" in capsys.readouterr().out
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["acyclic"] is True
        assert data["sound_complete"] is True

    @staticmethod
    def test_bad_bound(capsys):
        assert main(["classify", HIRING, "--case-bound", "0"]) == 2

    @staticmethod
    def test_translate_to_file(tmp_path):
        out = tmp_path / "hiring.arts"
        assert main(["translate", HIRING, "--case-bound", "1", "-o", str(out)]) == 0
        assert out.read_text(encoding="utf-8").startswith("# artifact system (cases=1")

    @staticmethod
    def test_translate_mcmt_like(capsys):
        assert main(["translate", HIRING, "--emit", "mcmt-like"]) == 0
        assert capsys.readouterr().out.startswith(":comment")


class TestVerify:

    @staticmethod
    def test_unsafe_with_replay(request_files, tmp_path, capsys):
        model, completed, _ = request_files
        trace = tmp_path / "trace.txt"
        code = main(["verify", model, completed, "--case-bound", "1", "--backend", "internal",
                     "--trace-out", str(trace)])
        out = capsys.readouterr().out
        assert code == 1
        assert out.startswith("UNSAFE")
        assert "TRACE:" in out
        assert "REPLAY=confirmed" in out
        assert trace.read_text(encoding="utf-8").startswith("create_case")

    @staticmethod
    def test_safe_with_audit(request_files, tmp_path, capsys):
        model, _, unassigned = request_files
        tree = tmp_path / "tree.txt"
        code = main(["verify", model, unassigned, "--case-bound", "1", "--backend", "internal", "--audit",
                     "--tree-out", str(tree)])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("SAFE")
        assert "AUDIT=ok" in out
        assert tree.read_text(encoding="utf-8").startswith("# id parent")

    @staticmethod
    def test_cross_check(request_files, capsys):
        model, _, unassigned = request_files
        code = main(["verify", model, unassigned, "--case-bound", "1", "--backend", "internal",
                     "--cross-check", "internal"])
        assert code == 0
        assert "CROSS_CHECK=ok (" in capsys.readouterr().out

    @staticmethod
    def test_node_cap_is_unknown(request_files, capsys):
        model, completed, _ = request_files
        code = main(["verify", model, completed, "--case-bound", "1", "--backend", "internal",
                     "--max-nodes", "1"])
        assert code == 3
        assert "REASON=node cap 1 reached" in capsys.readouterr().out

    @staticmethod
    @pytest.mark.slow
    def test_hiring_completes(capsys):
        code = main(["verify", HIRING, prop("hiring_completed"), "--case-bound", "1", "--backend", "internal",
                     "--no-replay"])
        assert code == 1
        assert "NODES=" in capsys.readouterr().out

    @staticmethod
    def test_invalid_model_is_an_error(request_files, capsys):
        _, completed, _ = request_files
        assert main(["verify", str(MODELS_DIR / "broken.dab"), completed]) == 2


class TestSimulate:

    @staticmethod
    @pytest.mark.slow
    def test_hiring_witness(capsys):
        code = main(["simulate", HIRING, str(CATALOGS_DIR / "hiring.cat"), prop("hiring_completed"),
                     "--max-cases", "1", "--max-rows", "2"])
        assert code == 1
        assert capsys.readouterr().out.startswith("WITNESS")


@pytest.mark.slow
class TestBench:

    @staticmethod
    def test_hiring_suite(capsys):
        assert main(["bench", "--suite", "hiring", "--backend", "internal", "--no-replay"]) == 0
