import json
import os

import pytest
from click.testing import CliRunner

from homepilot.cli import main
from homepilot.config import AppConfig
from homepilot.gateway import deterministic_embedding
from homepilot.memory import TaskMemory
from homepilot.pipeline import PipelineConfig


@pytest.fixture
def runner():
    return CliRunner()


class TestRunCommand:
    def test_one_shot_prints_approved_proposal(self, runner):
        result = runner.invoke(main, ["run", "Make the bedroom ready for sleep"])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert doc["status"] == "approved"
        assert len(doc["subtasks"]) == 3

    def test_no_approve_leaves_review_status(self, runner):
        result = runner.invoke(
            main, ["run", "--no-approve", "Make the bedroom ready for sleep"]
        )
        doc = json.loads(result.output)
        assert doc["status"] == "awaiting_review"

    def test_failed_run_exits_nonzero(self, runner):
        result = runner.invoke(main, ["run", "Shade the windows forever"])
        assert result.exit_code == 1

    def test_query_prints_answers(self, runner):
        result = runner.invoke(main, ["run", "What is the room temperature?"])
        doc = json.loads(result.output)
        assert doc["answers"] == [["climate sensor", "temperature", 22.5]]


class TestEvalCommand:
    def test_cold_then_warm_via_cli(self, runner, tmp_path):
        snapshot = tmp_path / "mem.json"
        cold = runner.invoke(
            main,
            ["eval", "run", "--mode", "cold", "--snapshot", str(snapshot),
             "--report", str(tmp_path / "out"), "--format", "json"],
        )
        assert cold.exit_code == 0, cold.output
        cold_doc = json.loads(cold.output)
        warm = runner.invoke(
            main,
            ["eval", "run", "--mode", "warm", "--snapshot", str(snapshot), "--format", "json"],
        )
        warm_doc = json.loads(warm.output)
        assert warm_doc["provider_calls_total"] < cold_doc["provider_calls_total"]
        names = {p.name for p in (tmp_path / "out").iterdir()}
        assert "metrics.png" in names and "report-cold-full.csv" in names

    def test_warm_without_snapshot_fails(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["eval", "run", "--mode", "warm", "--snapshot", str(tmp_path / "missing.json")],
        )
        assert result.exit_code != 0


class TestMemoryCommands:
    def test_export_then_import_round_trip(self, runner, tmp_path):
        out = tmp_path / "exported.json"
        result = runner.invoke(main, ["memory", "export", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()

        dest = tmp_path / "installed.json"
        result = runner.invoke(
            main, ["memory", "import", str(out), "--memory", str(dest)]
        )
        assert result.exit_code == 0, result.output
        restored = TaskMemory.restore(dest, deterministic_embedding)
        assert restored.counts() == {"tasks": 0, "subtasks": 0, "contexts": 0}


class TestAppConfig:
    def test_yaml_file_and_env_override(self, tmp_path, monkeypatch):
        config_file = tmp_path / "config.yaml"
        config_file.write_text(
            "provider: http\nbase_url: https://llm.example/v1\nmodel_id: from-file\n"
            "pipeline:\n  retry_limit: 4\n  tau_task: 0.9\n"
        )
        monkeypatch.setenv("HOMEPILOT_MODEL_ID", "from-env")
        cfg = AppConfig.load(config_file)
        assert cfg.provider == "http"
        assert cfg.model_id == "from-env"  # env wins over file
        assert cfg.pipeline.retry_limit == 4
        assert cfg.pipeline.tau_task == 0.9

    def test_defaults_point_at_packaged_fixtures(self):
        cfg = AppConfig()
        assert cfg.corpus_dir.exists()
        assert cfg.playbook_path.exists()

    def test_pipeline_config_bounds(self):
        with pytest.raises(ValueError):
            PipelineConfig(retry_limit=0)
        with pytest.raises(ValueError):
            PipelineConfig(retry_limit=6)
        with pytest.raises(ValueError):
            PipelineConfig(tau_task=0.0)
        with pytest.raises(ValueError):
            PipelineConfig(tau_subtask=1.5)
