"""Command-line front end for the lab."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .checks import run_checks
from .config import Config
from .errors import ConfigError, LabError
from .experiment_manager import ExperimentManager
from .slocc import b_canon, classify, n_canon

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2

PROTOCOL_KINDS = ("nun_rotate", "bub_rotate", "bundo", "entangle")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slocc-lab",
        description="MBQC on SLOCC-transformed cluster states",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Experiment config (.md with YAML front matter)")
    common.add_argument("--seed", type=int, default=None, help="Master seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, default=None, help="Output CSV path")
    common.add_argument("--threads", type=int, default=None, help="Worker threads")

    sub = parser.add_subparsers(dest="command", required=True)
    verify = sub.add_parser("verify", parents=[common], help="Run the verification checks")
    verify.add_argument("--filter", default=None, help="Only checks whose name contains this")
    sub.add_parser("fig-corrlength", parents=[common], help="Correlation length of the alternating ring")
    sub.add_parser("fig-walk", parents=[common], help="Walker success and crossing")
    sub.add_parser("percolation", parents=[common], help="Spanning probability curves")
    sub.add_parser("run-protocol", parents=[common], help="Run a protocol experiment")
    classify_cmd = sub.add_parser("classify", help="Classify a 2x2 operator")
    classify_cmd.add_argument(
        "numbers", nargs="+", type=float,
        help="8 numbers: re/im of S00 S01 S10 S11; or 6: S00 re(S01) im(S01) re(S10) im(S10) S11",
    )
    return parser


def parse_matrix(numbers: Sequence[float]) -> np.ndarray:
    """Matrix from 8 re/im numbers, or 6 numbers with real diagonal entries."""
    if len(numbers) == 8:
        entries = [complex(numbers[k], numbers[k + 1]) for k in range(0, 8, 2)]
    elif len(numbers) == 6:
        a, b_re, b_im, c_re, c_im, d = numbers
        entries = [complex(a), complex(b_re, b_im), complex(c_re, c_im), complex(d)]
    else:
        raise ConfigError("classify expects 6 or 8 numbers", details={"count": len(numbers)})
    return np.array(entries, dtype=complex).reshape(2, 2)


def cmd_classify(args) -> int:
    op = classify(parse_matrix(args.numbers))
    report = {
        "kind": op.kind,
        "n_type": op.is_n_type,
        "b_type": op.is_b_type,
        "unitary": op.is_unitary,
        "theta": op.theta,
        "kappa": op.kappa,
    }
    if op.is_n_type:
        canon = n_canon(op)
        report["n_canon"] = {"theta": canon.theta, "gamma": canon.gamma, "kappa": canon.kappa}
    if op.is_b_type:
        canon = b_canon(op)
        report["b_canon"] = {"theta": canon.theta, "kappa": canon.kappa, "eps_im": canon.eps_im}
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.filter, args.seed)
    if not results:
        print(f"No checks match '{args.filter}'")
        return EXIT_CHECK_FAILED
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        line = f"{status}  {result.name:<20} value={result.value:.3e} threshold={result.threshold:.1e}"
        print(f"{line}  {result.detail}".rstrip())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def _load(manager: ExperimentManager, args, kinds: Sequence[str]) -> dict:
    if args.config is None:
        if len(kinds) != 1:
            raise ConfigError(f"--config is required for kinds {', '.join(kinds)}")
        return manager.default_config(kinds[0])
    config = manager.load_config(args.config)
    if config["kind"] not in kinds:
        raise ConfigError(
            f"Config kind '{config['kind']}' does not fit this command",
            details={"file": str(args.config), "expected": list(kinds)}
        )
    return config


def cmd_experiment(args, kinds: Sequence[str]) -> int:
    manager = ExperimentManager(Config.EXPERIMENTS_DIR)
    config = _load(manager, args, kinds)
    result = manager.run(config, seed=args.seed, out=args.out, threads=args.threads)
    print(json.dumps(result, indent=2, sort_keys=True, default=float))
    return EXIT_OK


COMMAND_KINDS = {
    "fig-corrlength": ("corrlength",),
    "fig-walk": ("walk",),
    "percolation": ("percolation",),
    "run-protocol": PROTOCOL_KINDS,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)

    try:
        Config.validate()
        logging.basicConfig(
            level=Config.LOG_LEVEL,
            format='[%(asctime)s] [%(levelname)s] [%(name)s] %(message)s',
            stream=sys.stderr
        )
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "classify":
            return cmd_classify(args)
        return cmd_experiment(args, COMMAND_KINDS[args.command])
    except ConfigError as e:
        logger.error(f"{e.message} {e.details}")
        return EXIT_CONFIG
    except LabError as e:
        logger.error(f"{e.code}: {e.message}")
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
