"""FastMCP server exposing the SLOCC MBQC lab as tools."""

import logging
import os
import signal
import sys
from typing import Optional

import numpy as np
from fastmcp import FastMCP

from .checks import run_checks as run_registered_checks
from .config import Config
from .errors import ConfigError
from .experiment_manager import ExperimentManager
from .slocc import b_canon, classify, n_canon
from .walk import WalkParams, crossing, exact_success, limit_success

logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO"),
    format='[%(asctime)s] [%(levelname)s] [%(name)s] %(message)s',
    stream=sys.stderr
)
logger = logging.getLogger(__name__)

Config.validate()
logger.debug(f"Configuration loaded: EXPERIMENTS_DIR={Config.EXPERIMENTS_DIR}, RESULTS_DIR={Config.RESULTS_DIR}")

mcp = FastMCP(name="SloccMbqcLab")

experiment_manager = ExperimentManager(Config.EXPERIMENTS_DIR, Config.RESULTS_DIR)


@mcp.tool(
    description="List the experiment configs available in the experiments directory"
)
def list_experiments() -> dict:
    """List experiment configs.

    Returns:
        Dictionary with experiments list and count
    """
    try:
        result = experiment_manager.list_experiments()
        logger.info(f"Listed {result['count']} experiments")
        return result
    except Exception as e:
        logger.error(f"Error listing experiments: {e}")
        raise


@mcp.tool(
    description="Run a named experiment and write its CSV (plus a JSONL audit log for protocols)"
)
def run_experiment(name: str, seed: Optional[int] = None, threads: Optional[int] = None) -> dict:
    """Run an experiment by name.

    Args:
        name: Experiment file name without the .md extension
        seed: Master seed (defaults to DEFAULT_SEED)
        threads: Worker threads for Monte Carlo kinds

    Returns:
        Dictionary with success status, written files and a summary
    """
    try:
        config = experiment_manager.get_experiment(name)
        return experiment_manager.run(config, seed=seed, threads=threads)
    except ConfigError as e:
        try:
            available = [item["filename"] for item in experiment_manager.list_experiments()["experiments"]]
        except Exception:
            available = []
        raise ConfigError(
            e.message,
            details={**e.details, "available_experiments": available}
        )
    except Exception as e:
        logger.error(f"Error running experiment: {e}")
        raise


@mcp.tool(
    description="Classify a 2x2 local operator as N-type, B-type or neither and return its canonical form"
)
def classify_operator(matrix: list[list[list[float]]]) -> dict:
    """Classify a local operator.

    Args:
        matrix: 2x2 matrix of [real, imag] pairs

    Returns:
        Dictionary with kind, theta, kappa and canonical parameters where defined
    """
    try:
        s = np.array([[complex(re, im) for re, im in row] for row in matrix], dtype=complex)
        op = classify(s)
        result = {
            "kind": op.kind,
            "n_type": op.is_n_type,
            "b_type": op.is_b_type,
            "unitary": op.is_unitary,
            "theta": op.theta,
            "kappa": op.kappa,
        }
        if op.is_n_type:
            canon = n_canon(op)
            result["gamma"] = canon.gamma
        if op.is_b_type:
            result["eps_im"] = b_canon(op).eps_im
        logger.info(f"Classified operator as {op.kind}")
        return result
    except Exception as e:
        logger.error(f"Error classifying operator: {e}")
        raise


@mcp.tool(
    description="Exact success probability of the B-undo walker within n steps"
)
def walk_success(lam: float, n: int, target: Optional[float] = None) -> dict:
    """Success probability of the B-undo walker.

    Args:
        lam: Ratio of the B operator's diagonal, in (0, 1)
        n: Step budget
        target: Optional probability whose crossing lambda is also returned

    Returns:
        Dictionary with p_n, the unlimited-step limit and first-passage probabilities
    """
    try:
        success = exact_success(WalkParams(lam=lam, n_max=n))
        result = {
            "lam": lam,
            "n": n,
            "p_n": success.p_n,
            "limit": limit_success(lam),
            "first_passage": list(success.first_passage),
        }
        if target is not None:
            result["crossing"] = crossing(n, target)
        return result
    except Exception as e:
        logger.error(f"Error computing walk success: {e}")
        raise


@mcp.tool(
    description="Run the closed-form versus simulation checks"
)
def run_checks(name_filter: Optional[str] = None, seed: Optional[int] = None) -> dict:
    """Run verification checks.

    Args:
        name_filter: Only checks whose name contains this string
        seed: Master seed

    Returns:
        Dictionary with per-check results and pass count
    """
    try:
        results = run_registered_checks(name_filter, seed)
        return {
            "checks": [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "value": r.value,
                    "threshold": r.threshold,
                    "detail": r.detail,
                }
                for r in results
            ],
            "passed": sum(r.passed for r in results),
            "count": len(results),
        }
    except Exception as e:
        logger.error(f"Error running checks: {e}")
        raise


def shutdown_handler(sig, frame):
    """Handle shutdown signals."""
    logger.info("Shutting down SloccMbqcLab MCP server...")
    sys.exit(0)


def main():
    """Main entry point for the server."""
    try:
        logger.info("Starting SloccMbqcLab MCP server...")

        signal.signal(signal.SIGINT, shutdown_handler)
        signal.signal(signal.SIGTERM, shutdown_handler)

        logger.info("SloccMbqcLab MCP server ready")
        mcp.run()

    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Server error: {e}", exc_info=True)
        raise


if __name__ == "__main__":
    main()
