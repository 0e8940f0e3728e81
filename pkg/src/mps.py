"""Matrix product states for long transformed chains and rings.

A chain stores one pair ``(A[0], A[1])`` per site. Open chains use a 1x2 row
pair on the first site and a 2x1 column pair on the last; rings use 2x2 pairs
everywhere and close with a trace. The represented state is
``(F_1 ⊗ ... ⊗ F_n) sum_s contraction(s) |s>`` with per-site unitary frames
``F_j``; cluster-derived chains use Hadamard frames.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import IllConditioned, InsufficientDecay
from .qmath import H, I2, X, dagger, d_matrix, rz
from .statevec import Operator, PureState, apply_local, as_operator, check_budget

logger = logging.getLogger(__name__)

DECAY_FLOOR = 1e-12
TRACE_FLOOR = 1e-12

SitePair = tuple[np.ndarray, np.ndarray]


@dataclass
class MpsChain:
    sites: list
    boundary: str = "open"
    frames: list = field(default_factory=list)
    canonical_checked: bool = False

    def __post_init__(self):
        if self.boundary not in ("open", "ring"):
            raise ValueError(f"Unknown boundary '{self.boundary}'")
        if not self.frames:
            self.frames = [I2.copy() for _ in self.sites]
        if len(self.frames) != len(self.sites):
            raise ValueError("One frame per site is required")

    @property
    def n(self) -> int:
        return len(self.sites)

    def bulk_sites(self) -> list[int]:
        """1-based sites whose matrices are square."""
        if self.boundary == "ring":
            return list(range(1, self.n + 1))
        return list(range(2, self.n))


@dataclass(frozen=True)
class CorrelationFit:
    """Exponential fit ``|C(2j)| ~ exp(-2j / length)``."""

    length: float
    slope: float
    intercept: float
    residual: float
    points: tuple

    @property
    def alternating(self) -> bool:
        return any(value < 0 for _, value in self.points)


def _pair(a0, a1) -> SitePair:
    return np.asarray(a0, dtype=complex), np.asarray(a1, dtype=complex)


_R = 1 / np.sqrt(2)
CLUSTER_BULK = _pair(H * _R, X @ H * _R)
CLUSTER_LEFT = _pair([[0.5, 0.5]], [[0.5, -0.5]])
CLUSTER_RIGHT = _pair([[1.0], [0.0]], [[0.0], [1.0]])


def cluster_sites(n: int, boundary: str = "open") -> MpsChain:
    """Cluster chain or ring in the Hadamard frame."""
    if boundary == "ring":
        if n < 3:
            raise ValueError("A ring needs at least 3 sites")
        sites = [CLUSTER_BULK] * n
    else:
        if n < 2:
            raise ValueError("An open chain needs at least 2 sites")
        sites = [CLUSTER_LEFT] + [CLUSTER_BULK] * (n - 2) + [CLUSTER_RIGHT]
    return MpsChain(sites=list(sites), boundary=boundary, frames=[H.copy() for _ in range(n)])


def nun_tensor(theta: float, gamma: float) -> SitePair:
    """Bulk tensors of an N-type site, ``W / sqrt 2`` and ``W Rz(4 theta) / sqrt 2``.

    With ``W = H Rz(-(gamma + 2 theta))``; in the Hadamard frame the site carries
    ``diag(1, i) D(theta) H Rz(-gamma)``.
    """
    w = H @ rz(-(gamma + 2 * theta))
    return _pair(w * _R, w @ rz(4 * theta) * _R)


def nun_sites(
    n: int,
    assignments: Mapping[int, tuple[float, float]],
    boundary: str = "open",
) -> MpsChain:
    """Cluster chain with N-type tensors on the assigned bulk sites."""
    chain = cluster_sites(n, boundary)
    bulk = set(chain.bulk_sites())
    for site, (theta, gamma) in assignments.items():
        if site not in bulk:
            raise ValueError(f"N-type tensors need a bulk site, got {site}")
        chain.sites[site - 1] = nun_tensor(theta, gamma)
    chain.canonical_checked = check_canonical(chain)
    return chain


def bub_sites(n: int, params: Union[Sequence[tuple[float, float]], tuple[float, float]]) -> MpsChain:
    """Open B-U-B chain with ``B = D(theta) Rz(2 gamma)`` on every even site.

    Args:
        n: Odd chain length (at least 3)
        params: (theta, gamma) per even site in order 2, 4, ...; a single pair
            is used for all of them

    Returns:
        MpsChain with identity frames
    """
    if n < 3 or n % 2 == 0:
        raise ValueError("B-U-B chains need an odd length of at least 3")
    even_count = (n - 1) // 2
    if len(params) == 2 and np.isscalar(params[0]):
        params = [tuple(params)] * even_count
    if len(params) != even_count:
        raise ValueError(f"Expected {even_count} (theta, gamma) pairs, got {len(params)}")

    def odd_pair(theta):
        c, s = np.cos(theta), np.sin(theta)
        return _pair([[c, s], [c, s]], [[-c, s], [c, -s]])

    def even_pair(gamma):
        return _pair([[0, np.exp(-1j * gamma)], [0, 0]], [[0, 0], [np.exp(1j * gamma), 0]])

    c, s = np.cos(params[0][0]), np.sin(params[0][0])
    sites = [_pair([[c * _R, s * _R]], [[c * _R, -s * _R]])]
    for k, (theta, gamma) in enumerate(params):
        sites.append(even_pair(gamma))
        if k + 1 < even_count:
            a0, a1 = odd_pair(params[k + 1][0])
            sites.append((a0 * _R, a1 * _R))
    sites.append(_pair([[_R], [_R]], [[-_R], [_R]]))

    chain = MpsChain(sites=sites, boundary="open")
    chain.canonical_checked = canonical_defect(chain) < 1e-12
    return chain


def dress_sites(chain: MpsChain, ops: Mapping[int, np.ndarray]) -> MpsChain:
    """Absorb local operators exactly: ``A'[i] = sum_k (F^dagger S F)_{ik} A[k]``."""
    sites = list(chain.sites)
    for site, op in ops.items():
        frame = chain.frames[site - 1]
        local = dagger(frame) @ np.asarray(op, dtype=complex) @ frame
        a0, a1 = sites[site - 1]
        sites[site - 1] = (
            local[0, 0] * a0 + local[0, 1] * a1,
            local[1, 0] * a0 + local[1, 1] * a1,
        )
    return replace(chain, sites=sites, frames=list(chain.frames), canonical_checked=False)


def alternating_n_ring(n: int, theta: float, gamma: float) -> MpsChain:
    """Ring with ``N = D(theta) H Rz(gamma)`` on every even site."""
    if n % 2:
        raise ValueError("The alternating ring needs an even number of sites")
    op = d_matrix(theta, np.sqrt(2.0)) @ H @ rz(gamma)
    return dress_sites(cluster_sites(n, "ring"), {site: op for site in range(2, n + 1, 2)})


def contract(chain: MpsChain) -> PureState:
    """Dense normalized state of a chain (frames applied)."""
    check_budget(chain.n)
    psi = np.stack(chain.sites[0])
    for a0, a1 in chain.sites[1:]:
        nxt = np.stack([a0, a1])
        psi = np.einsum("pab,qbc->pqac", psi, nxt).reshape(-1, psi.shape[1], nxt.shape[2])

    amps = np.trace(psi, axis1=1, axis2=2) if chain.boundary == "ring" else psi[:, 0, 0]
    state = PureState(n=chain.n, amps=amps)
    for site, frame in enumerate(chain.frames, start=1):
        if not np.allclose(frame, I2):
            state = apply_local(state, site, frame)
    return state.normalized()


def canonical_defect(chain: MpsChain) -> float:
    """Largest ``|| sum_s A[s] A[s]^dagger - I ||`` over sites."""
    worst = 0.0
    for a0, a1 in chain.sites:
        total = a0 @ dagger(a0) + a1 @ dagger(a1)
        worst = max(worst, float(np.linalg.norm(total - np.eye(total.shape[0]))))
    return worst


def unital_defect(chain: MpsChain) -> float:
    """Largest ``|| sum_s A[s]^dagger A[s] - I ||`` over bulk sites."""
    worst = 0.0
    for site in chain.bulk_sites():
        a0, a1 = chain.sites[site - 1]
        total = dagger(a0) @ a0 + dagger(a1) @ a1
        worst = max(worst, float(np.linalg.norm(total - I2)))
    return worst


def check_canonical(chain: MpsChain, tol: float = 1e-12) -> bool:
    return canonical_defect(chain) < tol and unital_defect(chain) < tol


def transfer(chain: MpsChain, site: int, op: Operator = "I") -> np.ndarray:
    """``E_O = sum_ij <i|F^dagger O F|j> A[j] ⊗ conj(A[i])``."""
    frame = chain.frames[site - 1]
    local = dagger(frame) @ as_operator(op) @ frame
    pair = chain.sites[site - 1]
    return sum(
        local[i, j] * np.kron(pair[j], pair[i].conj()) for i in range(2) for j in range(2)
    )


class _Scaled:
    """Matrix product kept as (normalized matrix, log of the removed scale)."""

    def __init__(self, mat: np.ndarray, log: float = 0.0):
        norm = np.linalg.norm(mat)
        self.mat = mat / norm if norm > 0 else mat
        self.log = log + (np.log(norm) if norm > 0 else 0.0)

    def __matmul__(self, other: "_Scaled") -> "_Scaled":
        return _Scaled(self.mat @ other.mat, self.log + other.log)


def _closing(product: _Scaled) -> tuple[complex, float]:
    return complex(np.trace(product.mat)), product.log


def _ratio(num: _Scaled, den: _Scaled) -> float:
    tn, ln = _closing(num)
    td, ld = _closing(den)
    if abs(td) < TRACE_FLOOR:
        raise IllConditioned(
            "Normalization trace of the transfer product vanishes",
            details={"trace": abs(td)}
        )
    return float(np.real(tn / td * np.exp(ln - ld)))


def ring_expectation(chain: MpsChain, ops: Mapping[int, Operator]) -> float:
    """Raw expectation ``<prod_site O_site>`` by transfer matrices."""
    num, den = None, None
    for site in range(1, chain.n + 1):
        e_id = _Scaled(transfer(chain, site))
        e_op = _Scaled(transfer(chain, site, ops[site])) if site in ops else e_id
        num = e_op if num is None else num @ e_op
        den = e_id if den is None else den @ e_id
    return _ratio(num, den)


def ring_correlator(
    chain: MpsChain,
    a: int,
    op_a: Operator,
    b: int,
    op_b: Operator,
    connected: bool = True,
) -> float:
    """Two-point correlation on an MPS (connected unless asked otherwise)."""
    if a == b:
        raise ValueError("Correlator sites must differ")
    joint = ring_expectation(chain, {a: op_a, b: op_b})
    if not connected:
        return joint
    return joint - ring_expectation(chain, {a: op_a}) * ring_expectation(chain, {b: op_b})


def ring_correlators(
    chain: MpsChain,
    a: int,
    op_a: Operator,
    op_b: Operator,
    distances: Sequence[int],
    connected: bool = True,
) -> list[float]:
    """Correlations between site ``a`` and sites ``a + d`` in one sweep.

    Distances wrap around on rings and must stay inside the chain otherwise.
    """
    n = chain.n
    order = [(a - 1 + k) % n + 1 for k in range(n)]
    if chain.boundary == "open" and max(distances) + a > n:
        raise ValueError("Distance runs past the end of the open chain")
    if any(d % n == 0 for d in distances):
        raise ValueError("Distances must not return to the starting site")
    if chain.boundary == "open" and a != 1:
        # open chains only close from site 1
        return [ring_correlator(chain, a, op_a, a + d, op_b, connected) for d in distances]

    e_id = [_Scaled(transfer(chain, s)) for s in order]
    e_b = {k: _Scaled(transfer(chain, order[k], op_b)) for k in {d % n for d in distances}}
    e_a = _Scaled(transfer(chain, a, op_a))

    # suffix[k] = E_k ... E_{n-1}
    suffix = [None] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = e_id[k] if suffix[k + 1] is None else e_id[k] @ suffix[k + 1]

    wanted = sorted({d % n for d in distances})
    plain, with_a = e_id[0], e_a
    den = suffix[0]
    mean_a = _ratio(_join(e_a, suffix[1]), den)
    results = {}
    k_next = 1
    for k in wanted:
        while k_next < k:
            plain = plain @ e_id[k_next]
            with_a = with_a @ e_id[k_next]
            k_next += 1
        tail = suffix[k + 1] if k + 1 < n else None
        joint = _ratio(_join(with_a @ e_b[k], tail), den)
        if connected:
            mean_b = _ratio(_join(plain @ e_b[k], tail), den)
            results[k] = joint - mean_a * mean_b
        else:
            results[k] = joint
    return [results[d % n] for d in distances]


def _join(head: _Scaled, tail: Optional[_Scaled]) -> _Scaled:
    return head if tail is None else head @ tail


def correlation_length(
    chain: MpsChain,
    ops: tuple[Operator, Operator] = ("Z", "Z"),
    start: int = 1,
    max_distance: Optional[int] = None,
) -> CorrelationFit:
    """Fit ``ln|C(2j)|`` against the pair count ``j``; the length is ``-2 / slope``.

    Raises:
        InsufficientDecay: With fewer than 4 usable points or no decay
    """
    limit = max_distance if max_distance is not None else chain.n // 2
    if chain.boundary == "open":
        limit = min(limit, chain.n - start)
    distances = list(range(2, limit + 1, 2))
    if not distances:
        raise InsufficientDecay("No even distances to fit", details={"max_distance": limit})

    values = ring_correlators(chain, start, ops[0], ops[1], distances)
    points = []
    for d, value in zip(distances, values):
        if abs(value) < DECAY_FLOOR:
            break
        points.append((d // 2, value))

    if len(points) < 4:
        raise InsufficientDecay(
            "Too few correlations above the floor",
            details={"usable_points": len(points)}
        )

    js = np.array([j for j, _ in points], dtype=float)
    logs = np.log(np.abs([v for _, v in points]))
    fit = stats.linregress(js, logs)
    if fit.slope >= 0:
        raise InsufficientDecay("Correlations do not decay", details={"slope": float(fit.slope)})

    residual = float(np.sqrt(np.mean((logs - (fit.intercept + fit.slope * js)) ** 2)))
    logger.debug(f"Fitted correlation slope {fit.slope:.6g} over {len(points)} points")
    return CorrelationFit(
        length=float(-2.0 / fit.slope),
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        residual=residual,
        points=tuple(points),
    )
