"""Exact and Monte Carlo analysis of the B-undo walker.

The walker starts at position 1 and is absorbed at 0. From position k it steps
back with probability ``(lam^2 + lam^(2k)) / (1 + lam^2 + lam^(2k) + lam^(2k+2))``
and forward otherwise.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import BudgetTooLarge, NoCrossing
from .validators import validate_lambda

logger = logging.getLogger(__name__)

MAX_ENUMERATION_STEPS = 40
METHOD_TOL = 1e-12
LAMBDA_GRID = np.linspace(0.01, 0.99, 200)


@dataclass(frozen=True)
class WalkParams:
    lam: float
    n_max: int
    start: int = 1

    def __post_init__(self):
        require_lambda(self.lam)


@dataclass(frozen=True)
class WalkSuccess:
    """Success within ``n_max`` steps and its split by absorption step."""

    p_n: float
    first_passage: tuple
    method: str
    method_gap: Optional[float] = None


@dataclass(frozen=True)
class SuccessCurve:
    n: int
    lams: tuple
    values: tuple


@dataclass(frozen=True)
class WalkEstimate:
    lam: float
    n: int
    trials: int
    success_fraction: float
    stderr: float


def require_lambda(lam) -> None:
    valid, error = validate_lambda(lam)
    if not valid:
        raise ValueError(f"{error}, got {lam!r}")


def backstep_probability(lam, k):
    """Probability that the walker at position ``k`` moves to ``k - 1``."""
    lam2 = np.square(lam)
    lam2k = np.power(lam, 2 * np.asarray(k, dtype=float))
    return (lam2 + lam2k) / (1 + lam2 + lam2k + lam2k * lam2)


def limit_success(lam: float) -> float:
    """Absorption probability with an unlimited number of steps."""
    return float(2 * lam**2 / (1 + lam**2))


def _dp(params: WalkParams) -> list[float]:
    size = params.start + params.n_max + 2
    dist = np.zeros(size)
    dist[params.start] = 1.0
    positions = np.arange(size)
    first_passage = []
    for _ in range(params.n_max):
        back = np.where(positions > 0, backstep_probability(params.lam, positions), 0.0)
        moved = np.zeros(size)
        moved[:-1] += (dist * back)[1:]
        moved[1:] += (dist * (1 - back))[:-1]
        first_passage.append(float(moved[0]))
        moved[0] = 0.0
        dist = moved
    return first_passage


def _enumerate(params: WalkParams) -> list[float]:
    if params.n_max > MAX_ENUMERATION_STEPS:
        raise BudgetTooLarge(
            f"Path enumeration is limited to {MAX_ENUMERATION_STEPS} steps",
            details={"n_max": params.n_max}
        )
    first_passage = [0.0] * params.n_max

    def descend(k: int, step: int, weight: float) -> None:
        if step == params.n_max:
            return
        back = float(backstep_probability(params.lam, k))
        if k == 1:
            first_passage[step] += weight * back
        else:
            descend(k - 1, step + 1, weight * back)
        descend(k + 1, step + 1, weight * (1 - back))

    descend(params.start, 0, 1.0)
    return first_passage


def exact_success(params: WalkParams, method: str = "dp") -> WalkSuccess:
    """Probability of absorption within ``n_max`` steps.

    Args:
        params: Walk parameters
        method: ``dp`` (dynamic programming), ``enumerate`` (all paths) or ``both``

    Raises:
        BudgetTooLarge: If enumeration is requested beyond 40 steps
    """
    if method == "enumerate":
        passage = _enumerate(params)
        return WalkSuccess(float(sum(passage)), tuple(passage), method)
    if method not in ("dp", "both"):
        raise ValueError(f"Unknown method '{method}'")

    passage = _dp(params)
    gap = None
    if method == "both":
        gap = float(max(abs(a - b) for a, b in zip(passage, _enumerate(params)))) if passage else 0.0
        if gap > METHOD_TOL:
            logger.warning(f"Walk methods disagree by {gap:.3e} at lambda={params.lam}")
    return WalkSuccess(float(sum(passage)), tuple(passage), method, gap)


def success_probability(lam: float, n: int) -> float:
    return exact_success(WalkParams(lam=lam, n_max=n)).p_n


def crossing(n: int, target: float, eps: float = 1e-6) -> float:
    """Smallest ``lam`` with ``p_n(lam) = target``.

    Raises:
        NoCrossing: If ``p_n`` stays below the target on (eps, 1 - eps)
    """
    def gap(lam):
        return success_probability(lam, n) - target

    if gap(1 - eps) < 0:
        raise NoCrossing(
            f"p_{n} never reaches {target}",
            details={"n": n, "target": target, "p_max": success_probability(1 - eps, n)}
        )
    if gap(eps) >= 0:
        return eps
    root = optimize.brentq(gap, eps, 1 - eps, xtol=1e-12)
    logger.debug(f"Crossing of p_{n} with {target} at lambda={root:.8f}")
    return float(root)


def per_k_curves(n: int, lams: Sequence[float]) -> np.ndarray:
    """First-success probability per step, one row per lambda (sums to p_n)."""
    return np.array([exact_success(WalkParams(lam=lam, n_max=n)).first_passage for lam in lams])


def success_curve(n: int, lams: Optional[Sequence[float]] = None) -> SuccessCurve:
    lams = LAMBDA_GRID if lams is None else np.asarray(lams, dtype=float)
    return SuccessCurve(
        n=n,
        lams=tuple(float(v) for v in lams),
        values=tuple(success_probability(float(v), n) for v in lams),
    )


def first_step_probabilities(theta1: float, theta3: float) -> tuple[float, float]:
    """Even outcome probabilities ``(1 ± cos 2theta1 cos 2theta3) / 2`` after the first B site."""
    product = np.cos(2 * theta1) * np.cos(2 * theta3)
    return float((1 + product) / 2), float((1 - product) / 2)


def walk_condition_statistics(samples: int, rng: np.random.Generator) -> dict:
    """Monte Carlo frequencies of the two-step geometry of the imaginary-angle walk.

    Both angles are uniform on (0, pi/2). The first B site puts the walker at
    ``L1 = ln cot theta1``; the second moves it by ``±L3``, ``+`` (same sign
    of the frame) with probability ``(1 + c1 c3) / 2``.

    Returns:
        dict with ``literal`` (``|L3| > |L1|``), ``turn_back`` (the favoured step
        lands nearer the origin) and ``stray`` (neither step lands nearer)
    """
    theta1 = rng.uniform(0, np.pi / 2, samples)
    theta3 = rng.uniform(0, np.pi / 2, samples)
    l1 = np.log(1 / np.tan(theta1))
    l3 = np.log(1 / np.tan(theta3))
    p_same = (1 + np.cos(2 * theta1) * np.cos(2 * theta3)) / 2
    land_same, land_flip = np.abs(l1 + l3), np.abs(l1 - l3)
    favoured = np.where(p_same >= 0.5, land_same, land_flip)
    start = np.abs(l1)
    return {
        "literal": float(np.mean(np.abs(l3) > start)),
        "turn_back": float(np.mean(favoured < start)),
        "stray": float(np.mean(np.minimum(land_same, land_flip) >= start)),
        "samples": samples,
    }


def sample_walks(lam: float, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean array, True where a walk of at most ``n`` steps is absorbed."""
    require_lambda(lam)
    k = np.ones(count, dtype=int)
    for _ in range(n):
        active = k > 0
        if not active.any():
            break
        back = rng.random(count) < backstep_probability(lam, np.maximum(k, 1))
        k = np.where(active, np.where(back, k - 1, k + 1), k)
    return k == 0


def simulate_walks(lam: float, n: int, trials: int, rng: np.random.Generator) -> WalkEstimate:
    """Sample ``trials`` walks of at most ``n`` steps."""
    fraction = float(np.mean(sample_walks(lam, n, trials, rng)))
    return WalkEstimate(
        lam=lam,
        n=n,
        trials=trials,
        success_fraction=fraction,
        stderr=float(np.sqrt(fraction * (1 - fraction) / trials)),
    )
