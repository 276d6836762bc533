"""CLI surface: exit codes, machine-parsable errors, schema-valid JSON."""

import csv
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from mptsne.netplane import CoordinatorService, TaskRegistry


def run_cli(*argv, env=None):
    return subprocess.run([sys.executable, "-m", "mptsne", *argv],
                          capture_output=True, text=True, timeout=120, env=env)


def load_schema(name: str) -> dict:
    return json.loads(resources.files("mptsne.schemas").joinpath(name).read_text())


@pytest.fixture(scope="module")
def data_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-data")
    rng = np.random.default_rng(0)
    paths = []
    for name in ("alpha", "beta"):
        path = root / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["f1", "f2", "f3", "label"])
            for i in range(8):
                writer.writerow(list(rng.uniform(-5, 5, 3).round(4)) + [f"c{i % 2}"])
        paths.append(str(path))
    return paths


@pytest.fixture(scope="module")
def coordinator():
    service = CoordinatorService(TaskRegistry())
    service.start()
    yield service
    service.stop()


def propose_args(url, dims=3, participants="alpha:8,beta:8", extra=()):
    return ["task", "propose", "--coordinator", url, "--participants", participants,
            "--dimensions", str(dims), "--perplexity", "3", "--iterations", "100",
            "--key-bits", "512", "--scale-bits", "16", "--max-abs-value", "10",
            "--seed", "5", *extra]


class TestOracle:
    def test_digest_deterministic(self, data_files):
        argv = ["oracle", "--data", *data_files, "--perplexity", "3",
                "--iterations", "80", "--scale-bits", "16", "--seed", "1", "--json"]
        first = run_cli(*argv)
        second = run_cli(*argv)
        assert first.returncode == 0, first.stderr
        assert json.loads(first.stdout) == json.loads(second.stdout)

    def test_json_matches_schema(self, data_files):
        result = run_cli("oracle", "--data", *data_files, "--perplexity", "3",
                         "--iterations", "80", "--scale-bits", "16",
                         "--seed", "1", "--json")
        jsonschema.validate(json.loads(result.stdout), load_schema("oracle.json"))

    def test_malformed_csv_exits_5(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("f1,f2\n1.0,not-a-number\n")
        result = run_cli("oracle", "--data", str(bad), "--perplexity", "2")
        assert result.returncode == 5
        assert result.stderr.startswith("error=data")
        assert result.stderr.count("\n") == 1

    def test_empty_csv_exits_5(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("")
        result = run_cli("oracle", "--data", str(bad), "--perplexity", "2")
        assert result.returncode == 5
        assert "header" in result.stderr


class TestBench:
    def test_csv_covers_steps_2_through_8(self, tmp_path):
        out = tmp_path / "bench.csv"
        result = run_cli("bench", "--n", "15", "--m", "3", "--iterations", "60",
                         "--seed", "2", "--out", str(out))
        assert result.returncode == 0, result.stderr
        rows = list(csv.DictReader(open(out)))
        assert [int(r["step"]) for r in rows] == [2, 3, 4, 5, 6, 7, 8]
        assert all(float(r["seconds"]) >= 0 for r in rows)
        assert "total" in result.stderr


class TestTaskCommands:
    def test_status_of_fresh_task_is_preparing(self, coordinator):
        url = coordinator.url
        proposed = run_cli(*propose_args(url))
        assert proposed.returncode == 0, proposed.stderr
        task_id = proposed.stdout.strip()
        status = run_cli("task", "status", task_id, "--coordinator", url)
        assert status.stdout.strip() == "Preparing"

    def test_propose_json_matches_schema(self, coordinator):
        result = run_cli(*propose_args(coordinator.url, extra=["--json"]))
        record = json.loads(result.stdout)
        jsonschema.validate(record, load_schema("task.json"))

    def test_list_json_matches_schema(self, coordinator):
        run_cli(*propose_args(coordinator.url))
        result = run_cli("task", "list", "--coordinator", coordinator.url, "--json")
        records = json.loads(result.stdout)
        schema = load_schema("task.json")
        assert records
        for record in records:
            jsonschema.validate(record, schema)

    def test_result_before_complete_conflicts(self, coordinator):
        url = coordinator.url
        task_id = run_cli(*propose_args(url)).stdout.strip()
        result = run_cli("task", "result", task_id, "--coordinator", url,
                         "--participant", "alpha")
        assert result.returncode == 4
        assert result.stderr.startswith("error=protocol")
        assert "not ready" in result.stderr

    def test_unknown_task_exits_2(self, coordinator):
        result = run_cli("task", "status", "feedfacefeedfacefeedfacefeedface",
                         "--coordinator", coordinator.url)
        assert result.returncode == 2
        assert result.stderr.startswith("error=config")

    def test_invalid_perplexity_rejected_with_field(self, coordinator):
        result = run_cli(*propose_args(coordinator.url,
                                       participants="alpha:2,beta:2"))
        assert result.returncode == 2
        assert "perplexity" in result.stderr

    def test_coordinator_unreachable_exits_3(self):
        result = run_cli("task", "list", "--coordinator", "http://127.0.0.1:9")
        assert result.returncode == 3
        assert result.stderr.startswith("error=network")

    def test_env_overrides_coordinator_flag(self, coordinator):
        import os
        env = dict(os.environ, MPTSNE_COORDINATOR=coordinator.url)
        result = run_cli("task", "list", "--coordinator", "http://127.0.0.1:9",
                         "--json", env=env)
        assert result.returncode == 0


class TestRoleProcesses:
    def test_second_collab_s_rejected(self, coordinator):
        registry_url = coordinator.url
        coordinator.registry.register_collaborator("S", "127.0.0.1:1")
        result = run_cli("run", "--role", "collab-s", "--coordinator", registry_url)
        assert result.returncode == 2
        assert "already claimed" in result.stderr

    def test_participant_wrong_dimension_exits_5(self, coordinator, data_files):
        url = coordinator.url
        task_id = run_cli(*propose_args(url, dims=5)).stdout.strip()
        result = run_cli("run", "--role", "participant", "--coordinator", url,
                         "--id", "alpha", "--data", data_files[0],
                         "--task", task_id)
        assert result.returncode == 5
        assert "dimension 3" in result.stderr and "dimension 5" in result.stderr

    def test_participant_requires_task(self, coordinator, data_files):
        result = run_cli("run", "--role", "participant", "--coordinator",
                         coordinator.url, "--id", "alpha", "--data", data_files[0])
        assert result.returncode == 2
        assert "--task" in result.stderr


class TestAuditCommand:
    def test_honest_audit_passes(self, data_files):
        result = run_cli("audit", "--data", *data_files, "--perplexity", "3",
                         "--iterations", "60", "--seed", "3", "--json")
        assert result.returncode == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["passed"] and not report["warnings"]

    def test_identity_permutation_warns(self, data_files):
        result = run_cli("audit", "--data", *data_files, "--perplexity", "3",
                         "--iterations", "60", "--seed", "3", "--json",
                         "--fault", "identity-permutation")
        report = json.loads(result.stdout)
        assert report["passed"]
        assert any("identity" in w for w in report["warnings"])

    def test_skip_noise_fails_with_exit_4(self, data_files):
        result = run_cli("audit", "--data", *data_files, "--perplexity", "3",
                         "--iterations", "60", "--seed", "3",
                         "--fault", "skip-entry-noise")
        assert result.returncode == 4
        assert result.stderr.startswith("error=protocol")
