"""Square-lattice percolation with union-find.

Site (r, c) of an L x L lattice has index ``r * L + c``. A configuration spans
when an open cluster connects column 0 to column L - 1 (open boundaries).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import networkx as nx
import numpy as np

from .config import Config
from .errors import NoCrossing
from .utils import parallel_map, spawn_seeds
from .walk import sample_walks, success_probability

logger = logging.getLogger(__name__)

SITE_THRESHOLD = 0.593
BOND_THRESHOLD = 0.5


@dataclass(frozen=True)
class BondLattice:
    """``horizontal[r, c]`` joins (r, c)-(r, c+1); ``vertical[r, c]`` joins (r, c)-(r+1, c)."""

    L: int
    horizontal: np.ndarray
    vertical: np.ndarray
    p: float
    seed: Optional[int] = None

    @property
    def bond_count(self) -> int:
        return int(self.horizontal.size + self.vertical.size)


@dataclass(frozen=True)
class SiteLattice:
    L: int
    occupied: np.ndarray
    p: float
    seed: Optional[int] = None


@dataclass(frozen=True)
class PercolationEstimate:
    p: float
    trials: int
    spanning_fraction: float
    stderr: float
    kind: str


Lattice = Union[BondLattice, SiteLattice]


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.size = [1] * size

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)


def generate(L: int, p: float, seed: Optional[int] = None, kind: str = "bond") -> Lattice:
    """Random lattice with each bond (or site) open independently with probability p."""
    if L < 2:
        raise ValueError("Lattice side must be at least 2")
    rng = np.random.default_rng(seed)
    if kind == "bond":
        return BondLattice(
            L=L,
            horizontal=rng.random((L, L - 1)) < p,
            vertical=rng.random((L - 1, L)) < p,
            p=p,
            seed=seed,
        )
    if kind == "site":
        return SiteLattice(L=L, occupied=rng.random((L, L)) < p, p=p, seed=seed)
    raise ValueError(f"Unknown percolation kind '{kind}'")


def spans(lattice: Lattice) -> bool:
    """Left-right crossing test with virtual nodes on both sides."""
    L = lattice.L
    left, right = L * L, L * L + 1
    sets = UnionFind(L * L + 2)

    if isinstance(lattice, BondLattice):
        open_site = np.ones((L, L), dtype=bool)
        horizontal, vertical = lattice.horizontal, lattice.vertical
    else:
        open_site = lattice.occupied
        horizontal = open_site[:, :-1] & open_site[:, 1:]
        vertical = open_site[:-1, :] & open_site[1:, :]

    for r in range(L):
        if open_site[r, 0]:
            sets.union(r * L, left)
        if open_site[r, L - 1]:
            sets.union(r * L + L - 1, right)
    for r, c in zip(*np.nonzero(horizontal)):
        sets.union(r * L + c, r * L + c + 1)
    for r, c in zip(*np.nonzero(vertical)):
        sets.union(r * L + c, (r + 1) * L + c)
    return sets.connected(left, right)


def lattice_graph(lattice: Lattice) -> nx.Graph:
    """Open part of the lattice as a networkx graph on (r, c) nodes."""
    L = lattice.L
    graph = nx.Graph()
    if isinstance(lattice, BondLattice):
        graph.add_nodes_from((r, c) for r in range(L) for c in range(L))
        graph.add_edges_from(((r, c), (r, c + 1)) for r, c in zip(*np.nonzero(lattice.horizontal)))
        graph.add_edges_from(((r, c), (r + 1, c)) for r, c in zip(*np.nonzero(lattice.vertical)))
        return graph
    occupied = lattice.occupied
    graph.add_nodes_from((r, c) for r, c in zip(*np.nonzero(occupied)))
    for r, c in graph.nodes:
        for nr, nc in ((r, c + 1), (r + 1, c)):
            if nr < L and nc < L and occupied[nr, nc]:
                graph.add_edge((r, c), (nr, nc))
    return graph


def spans_graph(lattice: Lattice) -> bool:
    """Breadth-first crossing test used to cross-check union-find."""
    graph = lattice_graph(lattice)
    L = lattice.L
    sources = [(r, 0) for r in range(L) if (r, 0) in graph]
    reached = set()
    for source in sources:
        if source not in reached:
            reached |= nx.node_connected_component(graph, source)
    return any((r, L - 1) in reached for r in range(L))


def _estimate(L: int, p: float, seeds: Sequence[int], kind: str) -> PercolationEstimate:
    hits = sum(spans(generate(L, p, seed, kind)) for seed in seeds)
    fraction = hits / len(seeds)
    return PercolationEstimate(
        p=float(p),
        trials=len(seeds),
        spanning_fraction=float(fraction),
        stderr=float(np.sqrt(fraction * (1 - fraction) / len(seeds))),
        kind=kind,
    )


def spanning_curve(
    L: int,
    ps: Sequence[float],
    trials: int,
    seed: Optional[int] = None,
    kind: str = "bond",
    threads: Optional[int] = None,
) -> list[PercolationEstimate]:
    """Spanning fraction for each probability; deterministic for any thread count."""
    seed = Config.DEFAULT_SEED if seed is None else seed
    seeds = spawn_seeds(seed, len(ps) * trials)
    jobs = [(p, seeds[i * trials:(i + 1) * trials]) for i, p in enumerate(ps)]
    estimates = parallel_map(
        lambda job: _estimate(L, job[0], job[1], kind), jobs, threads or Config.THREADS
    )
    logger.info(f"Percolation curve L={L} kind={kind}: {len(ps)} points x {trials} trials")
    return estimates


def crossing_probability(
    L: int,
    ps: Sequence[float],
    trials: int,
    seed: Optional[int] = None,
    kind: str = "bond",
    threads: Optional[int] = None,
) -> float:
    """Probability where the spanning fraction first crosses one half.

    Raises:
        NoCrossing: If the curve never crosses one half on the grid
    """
    ps = sorted(ps)
    curve = spanning_curve(L, ps, trials, seed, kind, threads)
    for lo, hi in zip(curve, curve[1:]):
        if lo.spanning_fraction < 0.5 <= hi.spanning_fraction:
            slope = (hi.spanning_fraction - lo.spanning_fraction) / (hi.p - lo.p)
            return float(lo.p + (0.5 - lo.spanning_fraction) / slope)
    raise NoCrossing(
        "Spanning fraction does not cross 1/2 on the probability grid",
        details={"L": L, "kind": kind}
    )


def from_bundo(
    L: int,
    lam: float,
    n_budget: int,
    seed: Optional[int] = None,
    mode: str = "formula",
) -> BondLattice:
    """Bond lattice whose bonds open when a B-undo walk succeeds within ``n_budget``.

    ``formula`` opens bonds with probability ``p_n(lam)``; ``walker`` simulates
    one walk per bond.
    """
    if mode == "formula":
        return generate(L, success_probability(lam, n_budget), seed, kind="bond")
    if mode != "walker":
        raise ValueError(f"Unknown mode '{mode}'")

    rng = np.random.default_rng(seed)
    opened = sample_walks(lam, n_budget, 2 * L * (L - 1), rng)
    split = L * (L - 1)
    return BondLattice(
        L=L,
        horizontal=opened[:split].reshape(L, L - 1),
        vertical=opened[split:].reshape(L - 1, L),
        p=success_probability(lam, n_budget),
        seed=seed,
    )
