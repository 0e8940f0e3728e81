"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from src.experiment_manager import ExperimentManager
from src.qmath import H, d_matrix, rz


@pytest.fixture
def rng():
    """Seeded random generator.

    Returns:
        numpy Generator with a fixed seed
    """
    return np.random.default_rng(20110701)


@pytest.fixture
def tmp_experiments_dir(tmp_path):
    """Create temporary experiments directory for testing.

    Args:
        tmp_path: pytest's temporary directory fixture

    Returns:
        Path to temporary experiments directory
    """
    experiments_dir = tmp_path / "experiments"
    experiments_dir.mkdir()
    return experiments_dir


@pytest.fixture
def experiment_manager(tmp_experiments_dir, tmp_path):
    """Create ExperimentManager with temporary directories.

    Args:
        tmp_experiments_dir: Temporary experiments directory fixture
        tmp_path: pytest's temporary directory fixture

    Returns:
        ExperimentManager instance writing into tmp_path/results
    """
    return ExperimentManager(tmp_experiments_dir, tmp_path / "results")


@pytest.fixture
def write_experiment(tmp_experiments_dir):
    """Factory writing an experiment file with the given front matter.

    Args:
        tmp_experiments_dir: Temporary experiments directory fixture

    Returns:
        Function (filename, front_matter_text, body="") -> Path
    """
    def write(filename: str, front_matter: str, body: str = ""):
        path = tmp_experiments_dir / filename
        path.write_text(f"---\n{front_matter.strip()}\n---\n\n{body}", encoding="utf-8")
        return path

    return write


@pytest.fixture
def random_state(rng):
    """Normalized random single-qubit state.

    Returns:
        Complex 2-vector
    """
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    return psi / np.linalg.norm(psi)


def n_operator(theta: float, gamma: float) -> np.ndarray:
    """N-type operator ``sqrt 2 D(theta) H Rz(gamma)``."""
    return d_matrix(theta, np.sqrt(2)) @ H @ rz(gamma)


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))
