"""Loading, validation and execution of declarative experiment configs."""

import logging
import re
from pathlib import Path
from typing import Optional

import frontmatter
import numpy as np
import yaml

from .config import Config
from .errors import ChainExhausted, ConfigError, LabError, NoCrossing
from .mps import alternating_n_ring, correlation_length
from .percolation import from_bundo, spanning_curve, spans
from .protocol import (
    RotationTarget,
    bub_chain_ops,
    bub_rotate,
    bundo_oracle_table,
    bundo_vertical,
    nun_chain_ops,
    nun_entangle,
    nun_rotate,
)
from .qmath import H, d_matrix, rz
from .utils import parallel_map, spawn_seeds, write_csv, write_jsonl
from .validators import (
    validate_angle,
    validate_budget,
    validate_experiment_kind,
    validate_experiment_name,
    validate_lambda,
    validate_lattice_side,
    validate_probability,
    validate_theta,
)
from .walk import crossing, limit_success, success_curve

REQUIRED_KEYS = ("name", "kind", "description")

# Kind-specific keys and their defaults; None marks an optional key without default
KIND_KEYS = {
    "corrlength": {"ring_size": 400, "thetas": 24, "gammas": [0.0], "max_distance": 40},
    "walk": {"n": 10, "lambdas": 200, "target": 0.593},
    "percolation": {
        "sizes": [16, 32, 64],
        "probabilities": [0.5, 0.55, 0.6, 0.65, 0.7],
        "trials": 200,
        "model": "site",
        "lam": None,
        "n_budget": 10,
    },
    "nun_rotate": {
        "target": {"zeta": 0.0, "eta": 0.0, "xi": 0.0},
        "theta": np.pi / 8,
        "gamma": "random",
        "max_sites": 60,
        "outcomes": None,
        "input": {"alpha": 1.0, "beta": 0.0},
        "restart": "fresh",
    },
    "bub_rotate": {
        "target": {"zeta": 0.0, "eta": 0.0, "xi": 0.0},
        "thetas": np.pi / 8,
        "max_sites": 200,
        "outcomes": None,
        "input": {"alpha": 1.0, "beta": 0.0},
    },
    "bundo": {"lam": 0.6, "max_even": 10, "mode": "sample"},
    "entangle": {"thetas": [0.35, 0.6], "gammas": [0.8, 2.1]},
}

MAX_RESTARTS = 10


def _key_line(file_path: Path, key: str) -> Optional[int]:
    try:
        lines = file_path.read_text(encoding="utf-8").splitlines()
    except OSError:
        return None
    for number, line in enumerate(lines, start=1):
        if re.match(rf"^{re.escape(key)}\s*:", line):
            return number
    return None


def _grid(spec, low: float, high: float) -> list[float]:
    """A count becomes an open uniform grid on (low, high); a list is used as is."""
    if isinstance(spec, int) and not isinstance(spec, bool):
        step = (high - low) / (spec + 1)
        return [low + step * (k + 1) for k in range(spec)]
    return [float(v) for v in spec]


def _input_state(spec: dict) -> np.ndarray:
    psi = np.array([complex(spec.get("alpha", 1.0)), complex(spec.get("beta", 0.0))])
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ConfigError("Input state must be nonzero", details={"input": spec})
    return psi / norm


def _target(spec: dict) -> RotationTarget:
    return RotationTarget(
        zeta=float(spec.get("zeta", 0.0)),
        eta=float(spec.get("eta", 0.0)),
        xi=float(spec.get("xi", 0.0)),
    )


class ExperimentManager:
    """Manages experiment configs and runs them."""

    def __init__(self, experiments_dir: Path, results_dir: Optional[Path] = None):
        """Initialize ExperimentManager.

        Args:
            experiments_dir: Directory with experiment ``.md`` files
            results_dir: Default output directory
        """
        self.experiments_dir = Path(experiments_dir)
        self.results_dir = Path(results_dir) if results_dir else Config.RESULTS_DIR
        self.logger = logging.getLogger(__name__)

    def list_experiments(self) -> dict:
        """List valid experiment configs.

        Returns:
            Dictionary with experiments list and count
        """
        if not self.experiments_dir.exists():
            self.logger.warning(f"Experiments directory not found: {self.experiments_dir}")
            return {"experiments": [], "count": 0}

        experiments = []
        for file_path in sorted(self.experiments_dir.glob("*.md")):
            try:
                config = self.load_config(file_path)
            except ConfigError as e:
                self.logger.warning(f"Skipping invalid file {file_path.name}: {e.message}")
                continue
            experiments.append({
                "name": config["name"],
                "kind": config["kind"],
                "description": config["description"],
                "filename": file_path.stem,
            })

        return {"experiments": experiments, "count": len(experiments)}

    def get_experiment(self, name: str) -> dict:
        """Load the experiment stored as ``<name>.md``.

        Raises:
            ConfigError: If the name is invalid, the file is missing or malformed
        """
        valid, error = validate_experiment_name(name)
        if not valid:
            raise ConfigError(error, details={"name": name})

        file_path = self.experiments_dir / f"{name}.md"
        if not file_path.resolve().is_relative_to(self.experiments_dir.resolve()):
            raise ConfigError("Invalid experiment name", details={"name": name})
        if not file_path.exists():
            raise ConfigError(f"Experiment '{name}' not found", details={"name": name})
        return self.load_config(file_path)

    def load_config(self, file_path: Path) -> dict:
        """Parse and validate one experiment file.

        Returns:
            Config dict with kind defaults filled in and ``notes`` holding the body

        Raises:
            ConfigError: With ``file`` and, where known, ``line`` in the details
        """
        file_path = Path(file_path)
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                post = frontmatter.load(f)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(
                f"Invalid YAML in {file_path.name}",
                details={"file": str(file_path), "line": mark.line + 2 if mark else None, "error": str(e)}
            )
        except OSError as e:
            raise ConfigError(
                f"Cannot read {file_path.name}",
                details={"file": str(file_path), "error": str(e)}
            )

        metadata = dict(post.metadata)
        for key in REQUIRED_KEYS:
            if key not in metadata:
                raise ConfigError(
                    f"Missing required key '{key}'",
                    details={"file": str(file_path), "line": None}
                )

        valid, error = validate_experiment_kind(metadata["kind"])
        if not valid:
            raise ConfigError(error, details={"file": str(file_path), "line": _key_line(file_path, "kind")})

        defaults = KIND_KEYS[metadata["kind"]]
        for key in metadata:
            if key not in REQUIRED_KEYS and key not in defaults:
                raise ConfigError(
                    f"Unknown key '{key}' for kind '{metadata['kind']}'",
                    details={"file": str(file_path), "line": _key_line(file_path, key)}
                )

        config = {**defaults, **metadata, "notes": post.content}
        try:
            self._validate_values(config)
        except ConfigError as e:
            key = e.details.get("key")
            e.details.update({"file": str(file_path), "line": _key_line(file_path, key) if key else None})
            raise
        return config

    def _validate_values(self, config: dict) -> None:
        def require(key, result):
            valid, error = result
            if not valid:
                raise ConfigError(f"{key}: {error}", details={"key": key})

        kind = config["kind"]
        if kind == "corrlength":
            require("ring_size", validate_budget(config["ring_size"]))
            if config["ring_size"] % 2:
                raise ConfigError("ring_size: must be even", details={"key": "ring_size"})
            if not isinstance(config["thetas"], int):
                for theta in config["thetas"]:
                    require("thetas", validate_theta(theta))
        elif kind == "walk":
            require("n", validate_budget(config["n"]))
            require("target", validate_probability(config["target"]))
            if not isinstance(config["lambdas"], int):
                for lam in config["lambdas"]:
                    require("lambdas", validate_lambda(lam))
        elif kind == "percolation":
            for size in config["sizes"]:
                require("sizes", validate_lattice_side(size))
            for p in config["probabilities"]:
                require("probabilities", validate_probability(p))
            require("trials", validate_budget(config["trials"]))
            if config["model"] not in ("bond", "site"):
                raise ConfigError("model: must be 'bond' or 'site'", details={"key": "model"})
            if config["lam"] is not None:
                require("lam", validate_lambda(config["lam"]))
                require("n_budget", validate_budget(config["n_budget"]))
        elif kind == "nun_rotate":
            require("theta", validate_theta(config["theta"]))
            require("max_sites", validate_budget(config["max_sites"]))
            if config["gamma"] != "random":
                require("gamma", validate_angle(config["gamma"]))
            if config["restart"] not in ("fresh", "continue"):
                raise ConfigError("restart: must be 'fresh' or 'continue'", details={"key": "restart"})
        elif kind == "bub_rotate":
            thetas = config["thetas"] if isinstance(config["thetas"], list) else [config["thetas"]]
            for theta in thetas:
                require("thetas", validate_theta(theta))
            require("max_sites", validate_budget(config["max_sites"]))
        elif kind == "bundo":
            require("lam", validate_lambda(config["lam"]))
            require("max_even", validate_budget(config["max_even"]))
            if config["mode"] not in ("sample", "oracle", "table"):
                raise ConfigError("mode: must be 'sample', 'oracle' or 'table'", details={"key": "mode"})
        elif kind == "entangle":
            for key in ("thetas", "gammas"):
                if not isinstance(config[key], list) or len(config[key]) != 2:
                    raise ConfigError(f"{key}: entangle needs a list of two angles", details={"key": key})
            for theta in config["thetas"]:
                require("thetas", validate_theta(theta))
            for gamma in config["gammas"]:
                require("gammas", validate_angle(gamma))

    def default_config(self, kind: str) -> dict:
        """Built-in config of a kind, used when a command is given no file."""
        return {"name": kind.replace("_", "-"), "kind": kind, "description": "defaults", **KIND_KEYS[kind], "notes": ""}

    def run(
        self,
        config: dict,
        seed: Optional[int] = None,
        out: Optional[Path] = None,
        threads: Optional[int] = None,
    ) -> dict:
        """Run an experiment and write its CSV (and JSONL audit log for protocols).

        Returns:
            Dictionary with success status, written files and a kind-specific summary
        """
        seed = Config.DEFAULT_SEED if seed is None else int(seed)
        threads = threads or Config.THREADS
        out = Path(out) if out else self.results_dir / f"{config['name']}.csv"
        runner = getattr(self, f"_run_{config['kind']}")

        self.logger.info(f"Running experiment '{config['name']}' ({config['kind']}) with seed {seed}")
        header, rows, summary, records = runner(config, seed, threads)
        files = [str(write_csv(out, header, rows))]
        if records is not None:
            files.append(str(write_jsonl(out.with_suffix(".jsonl"), records)))
        self.logger.info(f"Wrote {len(rows)} rows to {out}")

        return {
            "success": True,
            "name": config["name"],
            "kind": config["kind"],
            "rows": len(rows),
            "files": files,
            "summary": summary,
        }

    def _run_corrlength(self, config, seed, threads):
        thetas = _grid(config["thetas"], 0.0, np.pi / 2)
        grid = [(t, float(g)) for g in config["gammas"] for t in thetas]

        def point(item):
            theta, gamma = item
            x = abs(np.cos(2 * theta) * np.cos(gamma))
            exact = -2 / np.log(x) if 0 < x < 1 else float("nan")
            try:
                fit = correlation_length(
                    alternating_n_ring(config["ring_size"], theta, gamma),
                    max_distance=config["max_distance"],
                )
                return [theta, gamma, fit.length, exact, fit.residual]
            except LabError as e:
                self.logger.warning(f"No correlation length at theta={theta:.4f}, gamma={gamma:.4f}: {e}")
                return [theta, gamma, float("nan"), exact, float("nan")]

        rows = parallel_map(point, grid, threads)
        return ["theta", "gamma", "length", "exact", "residual"], rows, {"points": len(rows)}, None

    def _run_walk(self, config, seed, threads):
        lambdas = config["lambdas"]
        lams = np.linspace(0.01, 0.99, lambdas) if isinstance(lambdas, int) else lambdas
        curve = success_curve(config["n"], lams)
        rows = [[lam, p, limit_success(lam)] for lam, p in zip(curve.lams, curve.values)]
        try:
            lam_star = crossing(config["n"], config["target"])
        except NoCrossing as e:
            self.logger.warning(e.message)
            lam_star = None
        return ["lambda", f"p_{config['n']}", "p_limit"], rows, {"crossing": lam_star}, None

    def _run_percolation(self, config, seed, threads):
        rows = []
        sizes = config["sizes"]
        for L, child in zip(sizes, spawn_seeds(seed, len(sizes))):
            for estimate in spanning_curve(L, config["probabilities"], config["trials"], child, config["model"], threads):
                rows.append([L, estimate.p, estimate.trials, estimate.spanning_fraction, estimate.stderr, estimate.kind])
            if config["lam"] is not None:
                seeds = spawn_seeds(child + 1, config["trials"])
                lattices = [from_bundo(L, config["lam"], config["n_budget"], s, mode="walker") for s in seeds]
                fraction = float(np.mean([spans(lat) for lat in lattices]))
                stderr = float(np.sqrt(fraction * (1 - fraction) / len(seeds)))
                rows.append([L, lattices[0].p, len(seeds), fraction, stderr, "bundo"])
        header = ["L", "p", "trials", "spanning_fraction", "stderr", "kind"]
        return header, rows, {"sizes": sizes}, None

    def _protocol_rows(self, record):
        header = ["site", "role", "outcome", "probability", "frame_x", "frame_z", "pending_im"]
        rows = [
            [e.site, e.role, e.outcome, e.probability, e.frame[0], e.frame[1],
             float(np.imag(e.pending)) if e.pending is not None else 0.0]
            for e in record.entries
        ]
        return header, rows, [e.to_dict() for e in record.entries]

    def _run_nun_rotate(self, config, seed, threads):
        target, psi = _target(config["target"]), _input_state(config["input"])
        length = config["max_sites"]
        seeds = spawn_seeds(seed, 2 * MAX_RESTARTS)
        chain_seeds, measure_seeds = seeds[:MAX_RESTARTS], seeds[MAX_RESTARTS:]
        chain_seed = chain_seeds[0]
        for attempt in range(MAX_RESTARTS):
            # "continue" keeps the chain seed, so the longer chain extends the same sites
            ops = nun_chain_ops(config["theta"], config["gamma"], length, np.random.default_rng(chain_seed))
            measure_rng = np.random.default_rng(measure_seeds[attempt])
            try:
                result = nun_rotate(ops, target, psi, config["outcomes"], measure_rng)
                break
            except ChainExhausted as e:
                record = e.record
                self.logger.warning(f"N-U-N chain of {length} sites exhausted (attempt {attempt + 1})")
                if config["restart"] == "continue":
                    length *= 2
                elif attempt + 1 < MAX_RESTARTS:
                    chain_seed = chain_seeds[attempt + 1]
        else:
            header, rows, records = self._protocol_rows(record)
            return header, rows, {"completed": False}, records

        header, rows, records = self._protocol_rows(result.record)
        summary = {
            "completed": True,
            "attempts": attempt + 1,
            "sites_used": result.sites_used,
            "failures": result.failures,
            "fidelity": result.fidelity,
            "frame": [result.frame.x, result.frame.z],
        }
        return header, rows, summary, records

    def _run_bub_rotate(self, config, seed, threads):
        target, psi = _target(config["target"]), _input_state(config["input"])
        ops = bub_chain_ops(config["thetas"], config["max_sites"])
        try:
            result = bub_rotate(ops, target, psi, config["outcomes"], np.random.default_rng(seed))
        except ChainExhausted as e:
            self.logger.warning(f"B-U-B chain of {config['max_sites']} sites exhausted")
            header, rows, records = self._protocol_rows(e.record)
            return header, rows, {"completed": False}, records

        header, rows, records = self._protocol_rows(result.record)
        summary = {
            "completed": True,
            "sites_used": result.sites_used,
            "fidelity": result.fidelity,
            "phases": [len(trace) for trace in result.phases],
        }
        return header, rows, summary, records

    def _run_bundo(self, config, seed, threads):
        if config["mode"] == "table":
            table = bundo_oracle_table(config["lam"], config["max_even"])
            rows = [[r["history"] or "-", r["k"], r["formula"], r["born"]] for r in table]
            worst = max(abs(r["formula"] - r["born"]) for r in table) if table else 0.0
            return ["history", "k", "formula", "born"], rows, {"max_gap": worst}, None

        result = bundo_vertical(config["lam"], config["max_even"], config["mode"], np.random.default_rng(seed))
        raw = result.raw or [None] * result.steps
        rows = [
            [step, "" if r is None else r, e, k]
            for step, (r, e, k) in enumerate(zip(raw, result.effective, result.path[1:]), start=1)
        ]
        summary = {"success": result.success, "steps": result.steps, "probability": result.probability}
        return ["step", "raw", "effective", "position"], rows, summary, None

    def _run_entangle(self, config, seed, threads):
        (t1, t3), (g1, g3) = config["thetas"], config["gammas"]
        n1 = d_matrix(t1, np.sqrt(2)) @ H @ rz(g1)
        n3 = d_matrix(t3, np.sqrt(2)) @ H @ rz(g3)
        rows = []
        for m1 in (0, 1):
            for m2 in (0, 1):
                for m3 in (0, 1):
                    result = nun_entangle((n1, n3), np.eye(2), (m1, m2, m3))
                    rows.append([m1, m2, m3, result.distance, result.cz_equivalence()])
        summary = {"max_distance": max(r[3] for r in rows), "cz_equivalent": all(r[4] for r in rows)}
        return ["m1", "m2", "m3", "distance", "cz_equivalent"], rows, summary, None
