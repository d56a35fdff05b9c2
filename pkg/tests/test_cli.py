import json
import subprocess
import sys

import pytest

from lmkaczmarz import harness
from lmkaczmarz.cli import EXIT_CONFIG, EXIT_FAIL, main
from lmkaczmarz.problems import PROBLEMS

SMALL = ["--problem", "block-linear-64", "--seed", "1"]


class TestCli:
    def test_list_problems(self, capsys):
        assert main(["list-problems"]) == 0
        out = capsys.readouterr().out
        assert all(name in out for name in PROBLEMS)

    def test_run_writes_artifacts(self, tmp_path, capsys):
        assert main(["run", *SMALL, "--out-dir", str(tmp_path)]) == 0
        run_dir = tmp_path / harness.ExperimentSpec("block-linear-64", seed=1).run_name
        assert (run_dir / "trace.csv").exists()
        assert "artifacts:" in capsys.readouterr().out

    def test_run_uses_environment_directory(self, tmp_path, monkeypatch):
        monkeypatch.setenv(harness.ENV_OUT_DIR, str(tmp_path))
        assert main(["run", *SMALL, "--solver", "llk"]) == 0
        assert len(list(tmp_path.iterdir())) == 1

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "exp.yaml"
        cfg.write_text(f"problem: block-linear-64\nsolver: llk\nseed: 4\nout_dir: {tmp_path / 'out'}\n")
        assert main(["run", "--config", str(cfg), "--seed", "5"]) == 0
        (run_dir,) = list((tmp_path / "out").iterdir())
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["seed"] == 5 and summary["solver"] == "llk"

    def test_compare(self, tmp_path, capsys):
        assert main(["compare", *SMALL, "--out-dir", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "fewer_cycles" in out and "llmk" in out and "llk" in out
        assert len(list(tmp_path.iterdir())) == 2

    def test_verify_directories_and_corruption(self, tmp_path, capsys):
        assert main(["run", *SMALL, "--out-dir", str(tmp_path)]) == 0
        (run_dir,) = list(tmp_path.iterdir())
        assert main(["verify", str(run_dir)]) == 0
        trace = run_dir / "trace.csv"
        lines = trace.read_text().splitlines()
        head = lines[0].split(",")
        row = lines[1].split(",")
        col = head.index("omega")
        row[col] = "0" if row[col] == "1" else "1"
        lines[1] = ",".join(row)
        trace.write_text("\n".join(lines) + "\n")
        assert main(["verify", str(run_dir)]) == EXIT_FAIL
        assert "FAIL" in capsys.readouterr().out

    def test_verify_spec(self, capsys):
        assert main(["verify", *SMALL, "--alpha-mode", "residual-matched"]) == 0
        assert "experimental mode" in capsys.readouterr().out

    def test_sweep(self, tmp_path, capsys):
        argv = ["sweep", *SMALL, "--amplitudes", "0.04", "0.02", "0.01", "--out-dir", str(tmp_path)]
        assert main(argv) == 0
        assert "slope" in capsys.readouterr().out

    @pytest.mark.parametrize(
        "argv",
        [
            ["run", "--problem", "no-such-problem"],
            ["run", *SMALL, "--q", "1.5"],
            ["run", *SMALL, "--tau", "0.5"],
            ["run", "--solver", "llk"],
            ["sweep", *SMALL, "--amplitudes", "0.01", "0.02"],
        ],
    )
    def test_configuration_errors(self, argv, tmp_path, capsys):
        assert main([*argv, "--out-dir", str(tmp_path)]) == EXIT_CONFIG
        assert capsys.readouterr().err
        assert list(tmp_path.iterdir()) == []

    def test_summary_only_verify(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"problem": "block-linear-64", "record_level": "summary"}))
        assert main(["verify", "--config", str(cfg)]) == EXIT_FAIL
        assert "insufficient trace" in capsys.readouterr().err

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "lmkaczmarz", "list-problems"], capture_output=True, text=True, check=False
        )
        assert proc.returncode == 0 and "block-linear-64" in proc.stdout
