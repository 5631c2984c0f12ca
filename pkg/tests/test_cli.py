"""Command line behavior: exit codes, diagnostics, scenario runs, chat."""

import json

import pytest
from click.testing import CliRunner

from maestro.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def bundled_workflow_doc(workflow_id="rag"):
    from importlib import resources

    text = (resources.files("maestro.data.workflows") / f"{workflow_id}.json").read_text(
        encoding="utf-8"
    )
    return json.loads(text)


class TestValidate:
    def test_clean_workflow_exits_zero(self, runner, tmp_path):
        path = tmp_path / "wf.json"
        path.write_text(json.dumps(bundled_workflow_doc()), encoding="utf-8")
        result = runner.invoke(main, ["validate", str(path)])
        assert result.exit_code == 0, result.output
        assert "ok" in result.stdout

    def test_diagnostics_exit_one_as_json_lines(self, runner, tmp_path):
        doc = bundled_workflow_doc()
        clone = dict(doc["nodes"][0])
        clone["name"] = "Second Boss"
        doc["nodes"] = [doc["nodes"][0], clone, *doc["nodes"][1:]]
        path = tmp_path / "two_sup.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        result = runner.invoke(main, ["validate", str(path)])
        assert result.exit_code == 1
        codes = [json.loads(line)["code"] for line in result.stderr.splitlines() if line]
        assert "W002" in codes

    def test_missing_file_exits_two(self, runner):
        result = runner.invoke(main, ["validate", "/nope/none.json"])
        assert result.exit_code == 2

    def test_bad_json_exits_two(self, runner, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope", encoding="utf-8")
        result = runner.invoke(main, ["validate", str(path)])
        assert result.exit_code == 2
        assert "syntax" in result.stderr

    def test_missing_field_exits_two(self, runner, tmp_path):
        path = tmp_path / "thin.json"
        path.write_text('{"id": "x", "name": "x"}', encoding="utf-8")
        result = runner.invoke(main, ["validate", str(path)])
        assert result.exit_code == 2
        assert "entry" in result.stderr


class TestScenarioRun:
    def test_bundled_scenario_passes(self, runner):
        result = runner.invoke(main, ["scenario", "run", "s1_code"])
        assert result.exit_code == 0, result.output
        lines = [l for l in result.stdout.splitlines() if l]
        assert lines and all(l.startswith("PASS") for l in lines)
        assert any("rerun_identical" in l for l in lines)

    def test_unknown_scenario_exits_two(self, runner):
        result = runner.invoke(main, ["scenario", "run", "s9_ghost"])
        assert result.exit_code == 2
        assert "setup failure" in result.stderr

    def test_assertion_failure_exits_one(self, runner, tmp_path):
        doc = {
            "id": "local_fail",
            "workflow": "rag",
            "turns": [{
                "input": {"text": "What is the men's dress code?"},
                "expect": {"final_contains": ["this text never appears"]},
            }],
        }
        path = tmp_path / "fail.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        result = runner.invoke(main, ["scenario", "run", str(path)])
        assert result.exit_code == 1
        assert "FAIL" in result.stdout

    def test_unrecorded_exchange_is_setup_failure(self, runner, tmp_path):
        doc = {
            "id": "local_miss",
            "workflow": "rag",
            "turns": [{
                "input": {"text": "a prompt nobody ever recorded"},
                "expect": {"completed": True},
            }],
        }
        path = tmp_path / "miss.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        result = runner.invoke(main, ["scenario", "run", str(path)])
        assert result.exit_code == 2

    def test_scenario_file_with_media(self, runner, tmp_path):
        from importlib import resources

        root = resources.files("maestro.data.scenarios")
        (tmp_path / "media").mkdir()
        (tmp_path / "media" / "population_question.wav").write_bytes(
            (root / "media" / "population_question.wav").read_bytes()
        )
        (tmp_path / "s2.json").write_text(
            (root / "s2_rag.json").read_text(encoding="utf-8"), encoding="utf-8"
        )
        result = runner.invoke(main, ["scenario", "run", str(tmp_path / "s2.json")])
        assert result.exit_code == 0, result.output


class TestIngest:
    def test_text_file(self, runner, tmp_path):
        path = tmp_path / "notes.txt"
        path.write_text("First paragraph.\n\nSecond paragraph.", encoding="utf-8")
        result = runner.invoke(main, ["ingest", str(path)])
        assert result.exit_code == 0
        assert "chunks=" in result.stdout

    def test_unknown_suffix_exits_two(self, runner, tmp_path):
        path = tmp_path / "doc.pdf"
        path.write_bytes(b"%PDF-")
        result = runner.invoke(main, ["ingest", str(path)])
        assert result.exit_code == 2

    def test_undecodable_exits_one(self, runner, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_bytes(b"\xff\xfe\xff")
        result = runner.invoke(main, ["ingest", str(path)])
        assert result.exit_code == 1


class TestChat:
    def test_turn_renders_worker_lines(self, runner):
        result = runner.invoke(
            main,
            ["chat", "--workflow", "rag"],
            input="What is the men's dress code?\n/quit\n",
        )
        assert result.exit_code == 0, result.output
        assert "[worker:RAG Contents Searcher]" in result.stdout
        assert "collared shirts" in result.stdout

    def test_unknown_workflow_fails(self, runner):
        result = runner.invoke(main, ["chat", "--workflow", "ghost"], input="\n")
        assert result.exit_code == 1
        assert "unknown workflow" in result.stderr

    def test_eof_exits_cleanly(self, runner):
        result = runner.invoke(main, ["chat", "--workflow", "rag"], input="")
        assert result.exit_code == 0


class TestServe:
    def test_listen_parsed_and_uvicorn_invoked(self, runner, monkeypatch):
        calls = {}

        def fake_run(app, host, port):
            calls["host"], calls["port"] = host, port
            calls["routes"] = {r.path for r in app.routes}

        import uvicorn

        monkeypatch.setattr(uvicorn, "run", fake_run)
        result = runner.invoke(main, ["serve", "--listen", "127.0.0.1:8499"])
        assert result.exit_code == 0, result.output
        assert calls["host"] == "127.0.0.1" and calls["port"] == 8499
        assert "/v1/sessions" in calls["routes"]

    def test_bad_listen_exits_two(self, runner):
        result = runner.invoke(main, ["serve", "--listen", "nope"])
        assert result.exit_code == 2


class TestStateExport:
    def test_empty_store_exports_nothing(self, runner):
        result = runner.invoke(main, ["state", "export"])
        assert result.exit_code == 0
        assert result.stdout.strip() == ""

    def test_scenario_export_emits_store_lines(self, runner):
        result = runner.invoke(main, ["state", "export", "--scenario", "s2_rag"])
        assert result.exit_code == 0, result.output
        entries = [json.loads(line) for line in result.stdout.splitlines() if line]
        assert entries
        keys = {e["key"] for e in entries}
        assert any(k.endswith("/final") for k in keys)
        assert all(e["ns"].startswith("session/") for e in entries)
        # check lines stay off stdout so the export is machine readable
        assert "PASS" not in result.stdout
        assert "PASS" in result.stderr
