"""Unit tests for ExperimentManager."""

import csv
import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from src import experiment_manager as manager_module
from src.errors import ConfigError
from src.experiment_manager import KIND_KEYS, ExperimentManager
from src.validators import EXPERIMENT_KINDS

FIXTURES = Path(__file__).parent / "fixtures"
REPO_EXPERIMENTS = Path(__file__).parent.parent / "experiments"


def read_rows(path: Path) -> list[dict]:
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# slocc-mbqc-lab ")
    return list(csv.DictReader(lines[1:]))


class TestLoadConfig:
    """Tests for load_config method."""

    def test_valid_fixture(self, experiment_manager):
        config = experiment_manager.load_config(FIXTURES / "valid-experiment.md")
        assert config["kind"] == "walk"
        assert config["n"] == 6
        assert config["lambdas"] == [0.2, 0.5, 0.8]
        assert "Coarse grid" in config["notes"]

    def test_defaults_filled(self, write_experiment, experiment_manager):
        path = write_experiment("bundo.md", "name: bundo\nkind: bundo\ndescription: defaults")
        config = experiment_manager.load_config(path)
        assert config["lam"] == KIND_KEYS["bundo"]["lam"]
        assert config["mode"] == "sample"

    def test_invalid_yaml(self, experiment_manager):
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(FIXTURES / "invalid-yaml.md")
        assert isinstance(info.value.details["line"], int)
        assert info.value.details["file"].endswith("invalid-yaml.md")

    def test_missing_kind(self, experiment_manager):
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(FIXTURES / "missing-fields.md")
        assert "kind" in info.value.message

    def test_unknown_key_reports_line(self, experiment_manager):
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(FIXTURES / "unknown-key.md")
        assert "max_evn" in info.value.message
        assert info.value.details["line"] == 6

    def test_unknown_kind(self, write_experiment, experiment_manager):
        path = write_experiment("x.md", "name: x\nkind: teleport\ndescription: nope")
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(path)
        assert info.value.details["line"] == 3

    def test_out_of_range_value(self, write_experiment, experiment_manager):
        path = write_experiment("w.md", "name: w\nkind: walk\ndescription: d\ntarget: 1.5")
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(path)
        assert info.value.message.startswith("target")
        assert info.value.details["line"] == 5

    def test_bad_mode(self, write_experiment, experiment_manager):
        path = write_experiment("b.md", "name: b\nkind: bundo\ndescription: d\nmode: guess")
        with pytest.raises(ConfigError):
            experiment_manager.load_config(path)

    def test_entangle_needs_two_links(self, write_experiment, experiment_manager):
        path = write_experiment("e.md", "name: e\nkind: entangle\ndescription: d\nthetas: [0.3]")
        with pytest.raises(ConfigError):
            experiment_manager.load_config(path)

    @pytest.mark.parametrize("gammas, line", [("[0.1, x]", 5), ("[]", 5), ("0.4", 5), ("[0.1, .nan]", 5)])
    def test_entangle_gammas_checked(self, write_experiment, experiment_manager, gammas, line):
        path = write_experiment("e.md", f"name: e\nkind: entangle\ndescription: d\ngammas: {gammas}")
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(path)
        assert info.value.message.startswith("gammas")
        assert info.value.details["line"] == line

    def test_nun_rotate_gamma_checked(self, write_experiment, experiment_manager):
        path = write_experiment("n.md", "name: n\nkind: nun_rotate\ndescription: d\ngamma: randomly")
        with pytest.raises(ConfigError) as info:
            experiment_manager.load_config(path)
        assert info.value.details["line"] == 5

    def test_odd_ring_rejected(self, write_experiment, experiment_manager):
        path = write_experiment("c.md", "name: c\nkind: corrlength\ndescription: d\nring_size: 41")
        with pytest.raises(ConfigError):
            experiment_manager.load_config(path)

    def test_shipped_experiments_are_valid(self, tmp_path):
        manager = ExperimentManager(REPO_EXPERIMENTS, tmp_path)
        result = manager.list_experiments()
        assert {item["kind"] for item in result["experiments"]} == set(EXPERIMENT_KINDS)


class TestListAndGet:
    """Tests for list_experiments and get_experiment."""

    def test_list_empty_directory(self, experiment_manager):
        assert experiment_manager.list_experiments() == {"experiments": [], "count": 0}

    def test_list_missing_directory(self, tmp_path):
        manager = ExperimentManager(tmp_path / "nowhere", tmp_path)
        assert manager.list_experiments()["count"] == 0

    def test_list_skips_invalid_files(self, experiment_manager, tmp_experiments_dir):
        shutil.copy(FIXTURES / "valid-experiment.md", tmp_experiments_dir / "small-walk.md")
        shutil.copy(FIXTURES / "invalid-yaml.md", tmp_experiments_dir / "broken.md")
        (tmp_experiments_dir / "plain.md").write_text("No front matter here")
        result = experiment_manager.list_experiments()
        assert result["count"] == 1
        assert result["experiments"][0]["filename"] == "small-walk"

    def test_get_experiment(self, experiment_manager, tmp_experiments_dir):
        shutil.copy(FIXTURES / "valid-experiment.md", tmp_experiments_dir / "small-walk.md")
        assert experiment_manager.get_experiment("small-walk")["name"] == "small-walk"

    def test_get_missing_experiment(self, experiment_manager):
        with pytest.raises(ConfigError):
            experiment_manager.get_experiment("absent")

    def test_get_invalid_name(self, experiment_manager):
        with pytest.raises(ConfigError):
            experiment_manager.get_experiment("../escape")


class TestRun:
    """Tests for running experiments."""

    def test_default_configs_cover_kinds(self, experiment_manager):
        for kind in EXPERIMENT_KINDS:
            config = experiment_manager.default_config(kind)
            assert config["kind"] == kind
            assert set(KIND_KEYS[kind]) <= set(config)

    def test_walk(self, experiment_manager, tmp_path):
        config = experiment_manager.load_config(FIXTURES / "valid-experiment.md")
        result = experiment_manager.run(config, seed=1)
        assert result["success"] is True
        assert result["rows"] == 3
        assert result["summary"]["crossing"] is not None
        rows = read_rows(Path(result["files"][0]))
        assert list(rows[0]) == ["lambda", "p_6", "p_limit"]

    def test_corrlength_marks_unfittable_points(self, experiment_manager, tmp_path):
        config = {
            **experiment_manager.default_config("corrlength"),
            "ring_size": 400,
            "thetas": [0.3, math.pi / 4],
            "gammas": [0.0],
            "max_distance": 16,
        }
        result = experiment_manager.run(config, out=tmp_path / "corr.csv", threads=1)
        rows = read_rows(Path(result["files"][0]))
        assert math.isclose(float(rows[0]["length"]), float(rows[0]["exact"]), rel_tol=1e-6)
        assert math.isnan(float(rows[1]["length"]))

    def test_percolation_with_bundo_rows(self, experiment_manager, tmp_path):
        config = {
            **experiment_manager.default_config("percolation"),
            "sizes": [8],
            "probabilities": [0.5, 0.7],
            "trials": 5,
            "model": "bond",
            "lam": 0.7,
            "n_budget": 6,
        }
        result = experiment_manager.run(config, out=tmp_path / "perc.csv", threads=2)
        rows = read_rows(Path(result["files"][0]))
        assert [row["kind"] for row in rows] == ["bond", "bond", "bundo"]

    def test_nun_rotate_writes_audit_log(self, experiment_manager, tmp_path):
        config = {**experiment_manager.default_config("nun_rotate"), "theta": 0.5, "max_sites": 101}
        result = experiment_manager.run(config, seed=7, out=tmp_path / "nun.csv")
        assert result["summary"]["completed"] is True
        assert result["summary"]["fidelity"] > 1 - 1e-9
        log = Path(result["files"][1]).read_text().splitlines()
        assert len(log) == result["summary"]["sites_used"]
        assert json.loads(log[0])["site"] == 1

    def test_nun_rotate_continue_grows_chain(self, experiment_manager, tmp_path):
        config = {
            **experiment_manager.default_config("nun_rotate"),
            "gamma": 0.5,
            "max_sites": 3,
            "restart": "continue",
        }
        result = experiment_manager.run(config, seed=7, out=tmp_path / "nun.csv")
        assert result["summary"]["completed"] is True
        assert result["summary"]["attempts"] > 1

    @pytest.fixture
    def nun_calls(self, monkeypatch):
        calls = []
        real = manager_module.nun_rotate

        def recording(ops, target, psi, outcomes, rng):
            calls.append({"ops": [op.copy() for op in ops], "rng_state": rng.bit_generator.state["state"]["state"]})
            return real(ops, target, psi, outcomes, rng)

        monkeypatch.setattr(manager_module, "nun_rotate", recording)
        return calls

    def test_continue_extends_same_chain(self, experiment_manager, tmp_path, nun_calls):
        config = {**experiment_manager.default_config("nun_rotate"), "max_sites": 3, "restart": "continue"}
        experiment_manager.run(config, seed=7, out=tmp_path / "nun.csv")
        first, second = nun_calls[0], nun_calls[1]
        assert len(second["ops"]) == 2 * len(first["ops"])
        assert all(np.allclose(a, b) for a, b in zip(first["ops"], second["ops"]))
        assert first["rng_state"] != second["rng_state"]

    def test_fresh_draws_new_chain(self, experiment_manager, tmp_path, nun_calls):
        config = {**experiment_manager.default_config("nun_rotate"), "max_sites": 3, "restart": "fresh"}
        result = experiment_manager.run(config, seed=7, out=tmp_path / "nun.csv")
        assert result["summary"]["completed"] is False
        assert len(nun_calls) == manager_module.MAX_RESTARTS
        assert all(len(call["ops"]) == 3 for call in nun_calls)
        assert not np.allclose(nun_calls[0]["ops"][0], nun_calls[1]["ops"][0])
        assert len({call["rng_state"] for call in nun_calls}) == manager_module.MAX_RESTARTS

    def test_runs_are_reproducible(self, experiment_manager, tmp_path):
        config = {**experiment_manager.default_config("nun_rotate"), "max_sites": 101}
        first = experiment_manager.run(config, seed=11, out=tmp_path / "a.csv")
        second = experiment_manager.run(config, seed=11, out=tmp_path / "b.csv")
        assert Path(first["files"][0]).read_bytes() == Path(second["files"][0]).read_bytes()

    def test_bub_rotate_forced(self, experiment_manager, tmp_path):
        config = {
            **experiment_manager.default_config("bub_rotate"),
            "thetas": 0.3,
            "max_sites": 41,
            "outcomes": [0, 1, 0, 0, 0, 1, 0, 0],
        }
        result = experiment_manager.run(config, out=tmp_path / "bub.csv")
        assert result["summary"]["completed"] is True
        assert result["summary"]["sites_used"] == 8
        assert result["summary"]["phases"] == [2, 2]

    def test_bundo_table(self, experiment_manager, tmp_path):
        config = {**experiment_manager.default_config("bundo"), "lam": 0.55, "max_even": 3, "mode": "table"}
        result = experiment_manager.run(config, out=tmp_path / "bundo.csv")
        assert result["summary"]["max_gap"] < 1e-10

    def test_bundo_sample(self, experiment_manager, tmp_path):
        result = experiment_manager.run(experiment_manager.default_config("bundo"), seed=3, out=tmp_path / "s.csv")
        rows = read_rows(Path(result["files"][0]))
        assert len(rows) == result["summary"]["steps"]

    def test_entangle(self, experiment_manager, tmp_path):
        result = experiment_manager.run(experiment_manager.default_config("entangle"), out=tmp_path / "ent.csv")
        assert result["rows"] == 8
        assert result["summary"]["cz_equivalent"] is True
        assert result["summary"]["max_distance"] < 1e-9
