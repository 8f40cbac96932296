import json

import numpy as np
import pytest

from fedhip import cli
from fedhip import data as fd


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(
        json.dumps(
            {
                "class_count": 4,
                "feature_dim": 8,
                "samples_per_class": 60,
                "class_mean_scale": 5.0,
                "noise_sigma": 1.0,
            }
        )
    )
    return str(path)


def run_cli(*argv):
    return cli.main(list(argv))


class TestSynthAndRun:
    def test_synth_then_run_round_trip(self, tmp_path, spec_file, capsys):
        bundles = tmp_path / "bundles"
        assert run_cli(
            "synth", "--synth", spec_file, "--k", "5", "--lambda", "0.1",
            "--seed", "4", "--out", str(bundles),
        ) == 0
        files = sorted(bundles.glob("*.fhip"))
        assert len(files) == 5
        total = sum(fd.read_bundle(p).sample_count for p in files)
        assert total == 240

        out = tmp_path / "runout"
        assert run_cli(
            "run", "--bundles", str(bundles), "--alpha", "10", "--beta", "1",
            "--seed", "4", "--out", str(out),
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["messages"] == {"uplinks": 5, "downlinks": 5}
        text = capsys.readouterr().out
        assert "personalized acc" in text

    def test_run_directly_from_spec(self, tmp_path, spec_file):
        out = tmp_path / "direct"
        assert run_cli(
            "run", "--synth", spec_file, "--k", "4", "--alpha", "5",
            "--seed", "1", "--out", str(out),
        ) == 0
        assert (out / "report.json").exists()

    def test_seed_env_fallback(self, tmp_path, spec_file, monkeypatch):
        out_env = tmp_path / "from_env"
        monkeypatch.setenv("FEDHIP_SEED", "77")
        assert run_cli(
            "run", "--synth", spec_file, "--k", "4", "--out", str(out_env)
        ) == 0
        monkeypatch.delenv("FEDHIP_SEED")
        out_flag = tmp_path / "from_flag"
        assert run_cli(
            "run", "--synth", spec_file, "--k", "4", "--seed", "77",
            "--out", str(out_flag),
        ) == 0
        a = json.loads((out_env / "report.json").read_text())
        b = json.loads((out_flag / "report.json").read_text())
        a.pop("timings"), b.pop("timings")
        assert a == b

    def test_missing_source_is_an_error(self, capsys):
        assert run_cli("run", "--k", "3") == 1
        assert "error:" in capsys.readouterr().err

    def test_beta_zero_rejected_without_flag(self, spec_file, capsys):
        assert run_cli(
            "run", "--synth", spec_file, "--k", "3", "--beta", "0"
        ) == 1
        assert "allow_beta_zero" in capsys.readouterr().err


class TestSweepCommand:
    def test_sweep_writes_csv(self, tmp_path, spec_file):
        out = tmp_path / "sweepout"
        assert run_cli(
            "sweep", "--synth", spec_file, "--k", "4", "--alphas", "0,5,25",
            "--beta", "1", "--seed", "2", "--out", str(out),
        ) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "alpha,beta,lambda,mean_acc_personalized,mean_acc_global"
        assert len(lines) == 4

    def test_sweep_needs_a_grid(self, spec_file, capsys):
        assert run_cli("sweep", "--synth", spec_file, "--k", "4") == 1
        assert "alphas" in capsys.readouterr().err


class TestPartitionCommand:
    def test_manifest_written(self, tmp_path, spec_file):
        out = tmp_path / "part"
        assert run_cli(
            "partition", "--synth", spec_file, "--k", "5", "--seed", "3",
            "--out", str(out),
        ) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["K"] == 5
        assert len(doc["per_client"]) == 5
        total = sum(
            len(c["train_indices"]) + len(c["test_indices"])
            for c in doc["per_client"]
        )
        assert total == 240


class TestOverheadCommand:
    def test_overhead_stdout(self, spec_file, capsys):
        assert run_cli("overhead", "--synth", spec_file, "--k", "3") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["payload_bytes"] == 4 * (8 * 8 + 8 * 4)
        assert doc["header_bytes"] == 16

    def test_overhead_written(self, tmp_path, spec_file):
        out = tmp_path / "oh"
        assert run_cli(
            "overhead", "--synth", spec_file, "--k", "3", "--out", str(out)
        ) == 0
        assert (out / "overhead.json").exists()


class TestVerifyCommand:
    def test_selected_suites_pass(self, tmp_path, capsys):
        out = tmp_path / "verify"
        assert run_cli(
            "verify", "--theorem1", "--lemma1", "--instances", "10",
            "--seed", "0", "--out", str(out),
        ) == 0
        text = capsys.readouterr().out
        assert "theorem1" in text and "PASS" in text
        lines = (out / "verify.jsonl").read_text().strip().splitlines()
        assert len(lines) == 30  # 10 theorem1 + 2x10 lemma1
        for line in lines:
            doc = json.loads(line)
            assert doc["passed"] is True

    def test_all_is_default(self, capsys):
        assert run_cli("verify", "--instances", "5") == 0
        text = capsys.readouterr().out
        for name in ("theorem1", "theorem2", "theorem3", "lemma1", "privacy", "weights"):
            assert name in text
