"""Named closed-form versus oracle checks run by ``slocc-lab verify``."""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import Config
from .mps import alternating_n_ring, correlation_length, dress_sites, cluster_sites, ring_correlator
from .percolation import SITE_THRESHOLD, spanning_curve
from .protocol import (
    RotationTarget,
    WireSimulator,
    bub_chain_ops,
    bundo_oracle_table,
    compile_cluster,
    nun_entangle,
    strategy1_basis,
    strategy2_basis,
)
from .qmath import H, KET0, d_matrix, operator_distance, rx, rz
from .slocc import mean_strategy1_failure, strategy1_byproduct_angle, strategy1_probs, strategy2_gate
from .statevec import (
    LatticeSpec,
    MeasurementBasis,
    TeleportRun,
    b_diagonal,
    build_cluster,
    extract_teleported,
    b_site_density,
    measure,
    reduced_density,
    schmidt_spectrum,
    spectrum_mismatch,
    two_point,
)
from .walk import WalkParams, crossing, exact_success, first_step_probabilities, walk_condition_statistics

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class Check:
    name: str
    description: str
    fn: Callable[[np.random.Generator], CheckResult]


CHECKS: list[Check] = []


def check(name: str, description: str):
    """Register a check function under a name."""
    def register(fn):
        CHECKS.append(Check(name=name, description=description, fn=fn))
        return fn
    return register


def _below(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(value <= threshold), float(value), threshold, detail)


def _random_state(rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    return psi / np.linalg.norm(psi)


@check("cluster-compile", "All 16 branches of the five-site cluster reach frame . U . psi")
def check_cluster_compile(rng):
    target = RotationTarget(*rng.uniform(0, 2 * np.pi, 3))
    psi = _random_state(rng)
    worst = max(
        1 - compile_cluster(target, psi, outcomes=branch).fidelity
        for branch in itertools.product((0, 1), repeat=4)
    )
    return _below("cluster-compile", worst, 1e-10, "1 - min fidelity")


@check("strategy1", "Strategy I operators and outcome probabilities")
def check_strategy1(rng):
    theta, gamma, xi = 0.3, 1.1, 0.7
    n_op = d_matrix(theta, np.sqrt(2)) @ H @ rz(gamma)
    lattice = LatticeSpec.chain(2).with_ops({1: n_op})
    basis = strategy1_basis(n_op, xi)
    mu = strategy1_byproduct_angle(theta, gamma, xi)
    worst = 0.0
    for outcome, expected in ((0, H @ rz(xi)), (1, rx(mu) @ H @ rz(xi))):
        teleported = extract_teleported(TeleportRun(lattice, (1,), (2,), ((1, basis, outcome),)))
        worst = max(worst, operator_distance(teleported, expected))
    state = build_cluster(lattice, input_state=_random_state(rng))
    p0 = measure(state, 1, basis, outcome=0).probability
    worst = max(worst, abs(p0 - strategy1_probs(theta, xi, gamma)[0]))
    return _below("strategy1", worst, 1e-9)


@check("mean-failure", "Average Strategy I failure 1 - sin(2 theta)/2 by quadrature")
def check_mean_failure(rng):
    worst = max(
        abs(mean_strategy1_failure(t, quadrature=True) - mean_strategy1_failure(t))
        for t in (0.2, 0.5, 0.7, np.pi / 4)
    )
    return _below("mean-failure", worst, 1e-10)


@check("strategy2", "Strategy II teleports X^m H Rz(beta' + i ln cot theta)")
def check_strategy2(rng):
    theta, beta = 0.4, 0.9
    b_op = b_diagonal(theta)
    lattice = LatticeSpec.chain(2).with_ops({1: b_op})
    basis = strategy2_basis(b_op, beta)
    worst = 0.0
    for m in (0, 1):
        teleported = extract_teleported(TeleportRun(lattice, (1,), (2,), ((1, basis, m),)))
        worst = max(worst, operator_distance(teleported, strategy2_gate(theta, beta, m).matrix()))
    return _below("strategy2", worst, 1e-9)


@check("entangle", "Vertical N-U-N link teleports a CZ-equivalent gate on every branch")
def check_entangle(rng):
    n1 = d_matrix(0.35, np.sqrt(2)) @ H @ rz(0.8)
    n3 = d_matrix(0.6, np.sqrt(2)) @ H @ rz(2.1)
    worst, equivalent = 0.0, True
    for branch in itertools.product((0, 1), repeat=3):
        result = nun_entangle((n1, n3), np.eye(2), branch)
        worst = max(worst, result.distance)
        equivalent = equivalent and result.cz_equivalence()
    return CheckResult("entangle", bool(worst < 1e-9 and equivalent), worst, 1e-9)


@check("single-n-ring", "Z-Z correlation across one N site equals cos 2theta cos gamma")
def check_single_n_ring(rng):
    theta, gamma = 0.35, 0.8
    n_op = d_matrix(theta, np.sqrt(2)) @ H @ rz(gamma)
    expected = np.cos(2 * theta) * np.cos(gamma)
    dense = build_cluster(LatticeSpec.ring(8).with_ops({4: n_op}))
    dense_gap = abs(two_point(dense, 3, "Z", 5, "Z") - expected)
    chain = dress_sites(cluster_sites(1000, "ring"), {500: n_op})
    mps_gap = abs(ring_correlator(chain, 499, "Z", 501, "Z") - expected)
    return _below("single-n-ring", max(dense_gap, mps_gap), 1e-9)


@check("correlation-length", "Fitted length of the alternating ring equals -2/ln|cos 2theta cos gamma|")
def check_correlation_length(rng):
    theta, gamma = 0.3, 0.4
    fit = correlation_length(alternating_n_ring(400, theta, gamma), max_distance=40)
    expected = -2 / np.log(abs(np.cos(2 * theta) * np.cos(gamma)))
    return _below("correlation-length", abs(fit.length - expected) / expected, 1e-8)


@check("b-site-density", "Closed-form single-site densities on a B-transformed grid")
def check_b_site_density(rng):
    lattice = LatticeSpec.grid(3, 3)
    thetas = {site: float(rng.uniform(0.1, 1.4)) for site in (1, 3, 5, 8, 9)}
    state = build_cluster(lattice.with_ops({s: b_diagonal(t) for s, t in thetas.items()}))
    worst = max(
        float(np.max(np.abs(reduced_density(state, [site]) - b_site_density(lattice, thetas, site))))
        for site in range(1, 10)
    )
    return _below("b-site-density", worst, 1e-10)


@check("bub-schmidt", "B-U-B chains have Schmidt coefficients cos theta, sin theta")
def check_bub_schmidt(rng):
    theta, worst = 0.3, 0.0
    for n in (5, 7):
        ops = {site: d_matrix(theta) @ rz(0.6) for site in range(2, n, 2)}
        state = build_cluster(LatticeSpec.chain(n).with_ops(ops))
        values = schmidt_spectrum(state, range(1, n // 2 + 1))
        worst = max(worst, float(np.max(np.abs(values[:2] - [np.cos(theta), np.sin(theta)]))))
    return _below("bub-schmidt", worst, 1e-10)


@check("weighted-mismatch", "Weighted three-site chains cannot reproduce B-type spectra")
def check_weighted_mismatch(rng):
    grid = np.linspace(0, 2 * np.pi, 100)
    smallest = min(
        min(spectrum_mismatch(theta, a, b) for a in grid for b in grid)
        for theta in (0.4, 1.2)
    )
    return CheckResult("weighted-mismatch", bool(smallest > 1e-3), smallest, 1e-3, "min mismatch")


@check("first-step", "First even outcome of a B-U-B wire and the stray statistic")
def check_first_step(rng):
    theta1, theta3 = 0.3, 0.9
    wire = WireSimulator(bub_chain_ops([theta1, theta3], 7), KET0)
    wire.measure(strategy2_basis(b_diagonal(theta1), 0.0), outcome=0)
    p_plus = wire.probabilities(MeasurementBasis.xy(0.0))[0]
    gap = abs(p_plus - first_step_probabilities(theta1, theta3)[0])
    stray = walk_condition_statistics(200_000, rng)["stray"]
    passed = gap < 1e-9 and abs(stray - 0.315) < 0.01
    return CheckResult("first-step", passed, gap, 1e-9, f"stray={stray:.4f}")


@check("bundo-walker", "Back-step formula equals Born probabilities; DP equals enumeration")
def check_bundo_walker(rng):
    rows = bundo_oracle_table(0.55, 4)
    worst = max(abs(r["formula"] - r["born"]) for r in rows)
    both = exact_success(WalkParams(lam=0.6, n_max=12), method="both")
    return _below("bundo-walker", max(worst, both.method_gap), 1e-10)


@check("walk-crossing", "p_10 reaches the site threshold at lambda ~ 0.671")
def check_walk_crossing(rng):
    lam = crossing(10, SITE_THRESHOLD)
    return _below("walk-crossing", abs(lam - 0.6714), 5e-4, f"lambda*={lam:.5f}")


@check("percolation", "Site lattices span above the threshold and not below it")
def check_percolation(rng):
    seed = int(rng.integers(2**32))
    low, high = spanning_curve(48, [0.50, 0.65], 20, seed=seed, kind="site", threads=1)
    gap = max(low.spanning_fraction, 1 - high.spanning_fraction)
    return _below("percolation", gap, 0.15)


def run_checks(name_filter: Optional[str] = None, seed: Optional[int] = None) -> list[CheckResult]:
    """Run every registered check whose name contains ``name_filter``."""
    seed = Config.DEFAULT_SEED if seed is None else seed
    selected = [c for c in CHECKS if not name_filter or name_filter in c.name]
    results = []
    for item, child in zip(selected, np.random.SeedSequence(seed).spawn(len(selected))):
        try:
            result = item.fn(np.random.default_rng(child))
        except Exception as e:
            logger.error(f"Check {item.name} raised: {e}")
            result = CheckResult(item.name, False, float("nan"), float("nan"), str(e))
        logger.info(f"Check {item.name}: {'pass' if result.passed else 'FAIL'} ({result.value:.3e})")
        results.append(result)
    return results
