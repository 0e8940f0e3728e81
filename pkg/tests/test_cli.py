"""Tests for the slocc-lab command line."""

import json
from pathlib import Path

import numpy as np
import pytest

from src import cli
from src.checks import CheckResult

FIXTURES = Path(__file__).parent / "fixtures"


class TestParseMatrix:
    """Tests for operator parsing."""

    def test_eight_numbers(self):
        m = cli.parse_matrix([1, 0, 0, 1, 0, -1, 2, 0])
        assert np.allclose(m, [[1, 1j], [-1j, 2]])

    def test_six_numbers_have_real_diagonal(self):
        m = cli.parse_matrix([1, 0.5, 0.2, 0.0, 0.0, 3])
        assert np.allclose(m, [[1, 0.5 + 0.2j], [0, 3]])

    def test_other_counts_rejected(self):
        from src.errors import ConfigError

        with pytest.raises(ConfigError):
            cli.parse_matrix([1, 2, 3])


class TestClassifyCommand:
    """Tests for the classify subcommand."""

    def test_b_type(self, capsys):
        c, s = np.cos(0.3), np.sin(0.3)
        code = cli.main(["classify", str(c), "0", "0", "0", "0", str(s)])
        report = json.loads(capsys.readouterr().out)
        assert code == 0
        assert report["kind"] == "B"
        assert np.isclose(report["b_canon"]["theta"], 0.3)

    def test_bad_count_exits_with_config_code(self):
        assert cli.main(["classify", "1", "2", "3"]) == cli.EXIT_CONFIG


class TestEnvironment:
    """Tests for configuration errors raised before any command runs."""

    def test_bad_threads_exit_with_config_code(self, monkeypatch):
        from src.config import Config

        monkeypatch.setattr(Config, "THREADS", 0)
        assert cli.main(["verify", "--filter", "mean-failure"]) == cli.EXIT_CONFIG

    def test_bad_budget_exit_with_config_code(self, monkeypatch, capsys):
        from src.config import Config

        monkeypatch.setattr(Config, "MAX_AMPLITUDES", 1)
        assert cli.main(["classify", "1", "0", "0", "0", "0", "1"]) == cli.EXIT_CONFIG
        assert capsys.readouterr().out == ""


class TestVerifyCommand:
    """Tests for the verify subcommand."""

    def test_filtered_pass(self, capsys):
        assert cli.main(["verify", "--filter", "mean-failure"]) == cli.EXIT_OK
        assert "1/1 checks passed" in capsys.readouterr().out

    def test_no_match(self):
        assert cli.main(["verify", "--filter", "no-such-check"]) == cli.EXIT_CHECK_FAILED

    def test_failure_sets_exit_code(self, monkeypatch):
        monkeypatch.setattr(cli, "run_checks", lambda name, seed: [CheckResult("x", False, 1.0, 0.1)])
        assert cli.main(["verify"]) == cli.EXIT_CHECK_FAILED


class TestExperimentCommands:
    """Tests for the experiment subcommands."""

    def test_fig_walk_with_config(self, tmp_path, capsys):
        out = tmp_path / "walk.csv"
        code = cli.main(["fig-walk", "--config", str(FIXTURES / "valid-experiment.md"), "--out", str(out)])
        assert code == cli.EXIT_OK
        assert out.exists()
        assert json.loads(capsys.readouterr().out)["rows"] == 3

    def test_kind_mismatch(self, tmp_path):
        code = cli.main(["fig-corrlength", "--config", str(FIXTURES / "valid-experiment.md"), "--out", str(tmp_path / "x.csv")])
        assert code == cli.EXIT_CONFIG

    def test_protocol_needs_config(self, tmp_path):
        assert cli.main(["run-protocol", "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG

    def test_invalid_config(self, tmp_path):
        code = cli.main(["run-protocol", "--config", str(FIXTURES / "unknown-key.md"), "--out", str(tmp_path / "x.csv")])
        assert code == cli.EXIT_CONFIG

    def test_protocol_run(self, tmp_path, write_experiment):
        path = write_experiment("ent.md", "name: ent\nkind: entangle\ndescription: link")
        out = tmp_path / "ent.csv"
        assert cli.main(["run-protocol", "--config", str(path), "--out", str(out), "--seed", "5"]) == cli.EXIT_OK
        assert out.read_text().startswith("# slocc-mbqc-lab")
