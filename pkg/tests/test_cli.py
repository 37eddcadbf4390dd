import json
import subprocess
import sys

import numpy as np
import pytest

from floodgate.cli import cli_main
from floodgate.dataset import load_dataset
from floodgate.io import RunManifest


def run(*argv):
    return cli_main([str(a) for a in argv])


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({
        "model": {"name": "ishigami"},
        "surrogate": {"kind": "krr", "train_size": 150, "n_validate": 1000},
        "methods": ["floodgate", "spf", "spf-surrogate", "panin"],
        "budgets": [80, 160],
        "trials": 3,
        "seed": 7,
    }))
    return p


class TestUsage:
    def test_unknown_subcommand_exit_2(self, capsys):
        assert run("frobnicate") == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag_exit_2(self, tmp_path):
        assert run("spf", "--model", "ishigami", "--out", tmp_path, "--bogus") == 2

    def test_validation_error_is_json_line(self, tmp_path, capsys):
        assert run("spf", "--model", "nope", "--out", tmp_path) == 1
        err = capsys.readouterr().err.strip().splitlines()
        doc = json.loads(err[-1])
        assert doc["error"] == "FormatError" and "nope" in doc["message"]

    def test_config_unknown_key_exit_1(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"model": {"name": "ishigami"}, "seeed": 1}')
        assert run("coverage", "--config", p, "--out", tmp_path / "o") == 1

    def test_spf_budget_too_small(self, tmp_path):
        assert run("spf", "--model", "hymod", "--budget", "11", "--out", tmp_path) == 1

    def test_console_script(self, tmp_path):
        out = subprocess.run([sys.executable, "-m", "floodgate.cli", "--help"], capture_output=True, text=True)
        assert out.returncode == 0 and "ground-truth" in out.stdout


class TestCommands:
    def test_spf_hymod_budget_ledger(self, tmp_path, caplog):
        caplog.set_level("INFO")
        assert run("spf", "--budget", 100, "--model", "hymod", "--out", tmp_path) == 0
        assert "n=16 pairs, 96 model evaluations" in caplog.text
        m = json.loads((tmp_path / "manifest.json").read_text())
        assert m["evaluations"]["model"] == 96
        rows = (tmp_path / "intervals.csv").read_text().splitlines()
        assert len(rows) == 2 + 5 and rows[2].split(",")[-1] == "16"

    def test_floodgate_config(self, cfg, tmp_path):
        out = tmp_path / "results"
        assert run("floodgate", "--config", cfg, "--out", out) == 0
        lines = (out / "intervals.csv").read_text().splitlines()
        assert lines[0].startswith("# floodgate-intervals format_version=1")
        assert len(lines) == 2 + 3
        m = RunManifest.load(out / "manifest.json")
        assert m.evaluations["model"] == 160 and m.seeds["master"] == 7
        assert sorted(m.outputs) == ["intervals.csv", "intervals.json"]
        js = json.loads((out / "intervals.json").read_text())
        assert len(js["results"][0]["diagnostics"]["cov"]) == 3

    def test_sample_evaluate_train_then_floodgate_on_file(self, tmp_path):
        d = tmp_path / "s"
        assert run("sample", "--model", "ishigami", "--budget", 256, "--batch-size", 32, "--out", d) == 0
        assert run("evaluate", "--model", "ishigami", "--data", d / "dataset.csv", "--out", tmp_path / "e") == 0
        data = load_dataset(tmp_path / "e" / "dataset.csv")
        assert data.num_batches == 8 and data.outputs is not None
        assert run("train-surrogate", "--model", "ishigami", "--train-size", 100, "--out", tmp_path / "k") == 0
        assert run("floodgate", "--model", "ishigami", "--data", tmp_path / "e" / "dataset.csv",
                   "--surrogate", tmp_path / "k" / "surrogate.json", "--out", tmp_path / "f") == 0
        m = json.loads((tmp_path / "f" / "manifest.json").read_text())
        assert m["evaluations"]["model"] == 0
        res = json.loads((tmp_path / "f" / "intervals.json").read_text())["results"]
        assert res[0]["diagnostics"]["n"] == 8 and res[0]["diagnostics"]["batched"]

    def test_train_surrogate_from_data(self, tmp_path):
        assert run("sample", "--model", "ishigami", "--budget", 200, "--out", tmp_path / "s") == 0
        assert run("evaluate", "--model", "ishigami", "--data", tmp_path / "s" / "dataset.csv", "--out", tmp_path / "e") == 0
        assert run("train-surrogate", "--model", "ishigami", "--data", tmp_path / "e" / "dataset.csv",
                   "--out", tmp_path / "k") == 0
        doc = json.loads((tmp_path / "k" / "surrogate.json").read_text())
        assert doc["kind"] == "krr" and len(doc["centers"]) == 200

    def test_evaluate_rejects_out_of_box(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x_1,x_2,x_3\n9,0,0\n")
        assert run("evaluate", "--model", "ishigami", "--data", p, "--out", tmp_path / "o") == 1

    def test_panin_and_spf_surrogate(self, cfg, tmp_path):
        assert run("panin", "--config", cfg, "--out", tmp_path / "p") == 0
        assert run("spf-surrogate", "--config", cfg, "--out", tmp_path / "q") == 0
        m = json.loads((tmp_path / "q" / "manifest.json").read_text())
        assert m["evaluations"]["model"] == 0

    def test_coverage_has_nominal_column(self, cfg, tmp_path):
        assert run("coverage", "--config", cfg, "--trials", 2, "--alpha", 0.05, "--out", tmp_path) == 0
        lines = (tmp_path / "coverage.csv").read_text().splitlines()
        header = lines[1].split(",")
        col = header.index("nominal")
        assert all(line.split(",")[col] == "0.95" for line in lines[2:])
        doc = json.loads((tmp_path / "coverage.json").read_text())
        assert np.array(doc["trials"]["lower"]).shape == (2, 2, 4, 3)

    def test_width_curve(self, cfg, tmp_path):
        assert run("width-curve", "--config", cfg, "--out", tmp_path) == 0
        doc = json.loads((tmp_path / "width_curve.json").read_text())
        assert set(doc["excess_width_loglog_slope"]) == {"x_1", "x_2", "x_3"}

    def test_ground_truth(self, tmp_path):
        assert run("ground-truth", "--model", "ishigami", "--n-large", 100000, "--out", tmp_path) == 0
        rows = (tmp_path / "ground_truth.csv").read_text().splitlines()[2:]
        est = [float(r.split(",")[2]) for r in rows]
        np.testing.assert_allclose(est, [0.5576, 0.4424, 0.2437], atol=0.02)

    def test_rerun_byte_identical(self, cfg, tmp_path):
        assert run("coverage", "--config", cfg, "--out", tmp_path / "a") == 0
        assert run("rerun", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0
        for name in ("coverage.csv", "coverage.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
