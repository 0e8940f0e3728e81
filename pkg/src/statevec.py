"""Dense statevector oracle for transformed cluster states.

Sites are numbered from 1; site 1 is the most significant bit of the amplitude
index, so the amplitude tensor of an n-site state has shape ``(2,) * n`` with
site ``k`` on axis ``k - 1``.
"""

import itertools
import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np

from .config import Config
from .errors import (
    InvalidBasis,
    SingularInput,
    SiteAlreadyMeasured,
    TooManyQubits,
    ZeroProbabilityBranch,
)
from .qmath import H, KET0, KET1, KET_PLUS, PAULIS, X, Z, d_matrix, is_invertible, rz
from .utils import atomic_write

logger = logging.getLogger(__name__)

ZERO_BRANCH_TOL = 1e-14

Operator = Union[str, np.ndarray]


def check_budget(n: int) -> None:
    """Raise TooManyQubits when ``2**n`` exceeds the configured budget."""
    if 2**n > Config.MAX_AMPLITUDES:
        raise TooManyQubits(
            f"{n} qubits exceed the amplitude budget",
            details={"n": n, "max_amplitudes": Config.MAX_AMPLITUDES}
        )


def axis(site: int) -> int:
    """Tensor axis of a 1-based site."""
    return site - 1


def as_operator(op: Operator) -> np.ndarray:
    if isinstance(op, str):
        return PAULIS[op.upper()]
    return np.asarray(op, dtype=complex)


@dataclass
class PureState:
    """Dense amplitude vector over ``n`` sites."""

    n: int
    amps: np.ndarray
    measured: frozenset = frozenset()

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if self.amps.size != 2**self.n:
            raise ValueError(f"Expected {2**self.n} amplitudes, got {self.amps.size}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n)

    def normalized(self) -> "PureState":
        return replace(self, amps=self.amps / self.norm)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, measured=frozenset()) -> "PureState":
        return cls(n=tensor.ndim, amps=tensor.reshape(-1), measured=frozenset(measured))


@dataclass
class LatticeSpec:
    """Graph of sites 1..n with a local operator per site (identity by default)."""

    topology: str
    dims: tuple
    graph: nx.Graph
    site_ops: dict = field(default_factory=dict)

    @classmethod
    def chain(cls, n: int) -> "LatticeSpec":
        graph = nx.relabel_nodes(nx.path_graph(n), lambda k: k + 1)
        return cls("chain", (n,), graph)

    @classmethod
    def ring(cls, n: int) -> "LatticeSpec":
        if n < 3:
            raise ValueError("A ring needs at least 3 sites")
        graph = nx.relabel_nodes(nx.cycle_graph(n), lambda k: k + 1)
        return cls("ring", (n,), graph)

    @classmethod
    def grid(cls, rows: int, cols: int) -> "LatticeSpec":
        """Row-major 2D grid: node (r, c) becomes site ``r * cols + c + 1``."""
        graph = nx.relabel_nodes(
            nx.grid_2d_graph(rows, cols), lambda rc: rc[0] * cols + rc[1] + 1
        )
        return cls("grid", (rows, cols), graph)

    @classmethod
    def cubic(cls, lx: int, ly: int, lz: int) -> "LatticeSpec":
        """Simple cubic lattice; (x, y, z) becomes site ``(x * ly + y) * lz + z + 1``."""
        def site(x, y, z):
            return (x * ly + y) * lz + z + 1

        graph = nx.Graph()
        for x, y, z in itertools.product(range(lx), range(ly), range(lz)):
            graph.add_node(site(x, y, z))
            if x + 1 < lx:
                graph.add_edge(site(x, y, z), site(x + 1, y, z))
            if y + 1 < ly:
                graph.add_edge(site(x, y, z), site(x, y + 1, z))
            if z + 1 < lz:
                graph.add_edge(site(x, y, z), site(x, y, z + 1))
        return cls("cubic", (lx, ly, lz), graph)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "LatticeSpec":
        graph = nx.Graph()
        graph.add_nodes_from(range(1, n + 1))
        for a, b in edges:
            if a == b:
                raise ValueError(f"Self-loop on site {a}")
            graph.add_edge(a, b)
        return cls("custom", (n,), graph)

    @property
    def n(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.graph.edges())

    def neighbors(self, site: int) -> list[int]:
        return sorted(self.graph.neighbors(site))

    def with_ops(self, ops: Mapping[int, np.ndarray]) -> "LatticeSpec":
        """Copy with additional site operators; every operator must be invertible."""
        merged = dict(self.site_ops)
        for site, op in ops.items():
            if site not in self.graph:
                raise ValueError(f"Site {site} is not in the lattice")
            op = np.asarray(op, dtype=complex)
            if not is_invertible(op):
                raise SingularInput(
                    f"Operator on site {site} is not invertible",
                    details={"site": site}
                )
            merged[site] = op
        return replace(self, site_ops=merged)


@dataclass(frozen=True)
class MeasurementBasis:
    """Orthonormal single-qubit basis ``{|m>, |m_perp>}``; outcome k projects on vector k."""

    m: np.ndarray
    m_perp: np.ndarray
    xi: Optional[float] = None
    phi: Optional[float] = None
    label: str = "custom"

    def vector(self, outcome: int) -> np.ndarray:
        return self.m_perp if outcome else self.m

    @classmethod
    def from_vectors(cls, m, m_perp, tol: float = 1e-12, **params) -> "MeasurementBasis":
        """Normalize a pair of vectors and check orthogonality.

        Raises:
            InvalidBasis: If the vectors are not orthogonal
        """
        m = np.asarray(m, dtype=complex)
        m_perp = np.asarray(m_perp, dtype=complex)
        m = m / np.linalg.norm(m)
        m_perp = m_perp / np.linalg.norm(m_perp)
        overlap = abs(np.vdot(m, m_perp))
        if overlap > tol:
            raise InvalidBasis(
                "Basis vectors are not orthogonal",
                details={"overlap": float(overlap)}
            )
        return cls(m=m, m_perp=m_perp, **params)

    @classmethod
    def bloch(cls, xi: float, phi: float) -> "MeasurementBasis":
        """``cos(xi/2)|+> + e^{i phi} sin(xi/2)|->`` and its orthogonal partner."""
        plus, minus = H @ KET0, H @ KET1
        m = np.cos(xi / 2) * plus + np.exp(1j * phi) * np.sin(xi / 2) * minus
        m_perp = -np.exp(-1j * phi) * np.sin(xi / 2) * plus + np.cos(xi / 2) * minus
        return cls.from_vectors(m, m_perp, xi=xi, phi=phi, label="bloch")

    @classmethod
    def xy(cls, xi: float) -> "MeasurementBasis":
        """x-y plane basis ``Rz(-xi) H |k>``; outcome m teleports ``X^m H Rz(xi)``."""
        return cls.from_vectors(
            rz(-xi) @ H @ KET0, rz(-xi) @ H @ KET1, xi=xi, phi=np.pi / 2, label="xy"
        )

    @classmethod
    def computational(cls) -> "MeasurementBasis":
        return cls(m=KET0.copy(), m_perp=KET1.copy(), label="Z")

    @classmethod
    def pauli(cls, name: str) -> "MeasurementBasis":
        """Eigenbasis of X, Y or Z; outcome 0 is the +1 eigenvector."""
        name = name.upper()
        if name == "Z":
            return cls.computational()
        if name == "X":
            return replace(cls.xy(0.0), label="X")
        if name == "Y":
            return cls.from_vectors(
                np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2), label="Y"
            )
        raise ValueError(f"Unknown Pauli basis '{name}'")

    def rotated(self, u: np.ndarray) -> "MeasurementBasis":
        """Basis ``{u|m>, u|m_perp>}``."""
        return MeasurementBasis.from_vectors(
            u @ self.m, u @ self.m_perp, xi=self.xi, phi=self.phi, label=self.label
        )

    def describe(self) -> dict:
        params = {"label": self.label}
        if self.xi is not None:
            params["xi"] = float(np.real(self.xi))
        if self.phi is not None:
            params["phi"] = float(self.phi)
        return params


@dataclass(frozen=True)
class MeasurementResult:
    outcome: int
    probability: float
    state: PureState


@dataclass(frozen=True)
class TeleportRun:
    """Descriptor for tomographic extraction of a teleported map."""

    lattice: LatticeSpec
    input_sites: tuple
    output_sites: tuple
    measurements: tuple  # of (site, MeasurementBasis, outcome)


def apply_local(state: PureState, site: int, op: np.ndarray) -> PureState:
    """Apply a 2x2 operator to one site (no renormalization)."""
    psi = np.tensordot(np.asarray(op, dtype=complex), state.tensor(), axes=([1], [axis(site)]))
    psi = np.moveaxis(psi, 0, axis(site))
    return replace(state, amps=psi.reshape(-1))


def apply_two(state: PureState, a: int, b: int, op: np.ndarray) -> PureState:
    """Apply a 4x4 operator to sites (a, b), a being the more significant factor."""
    op = np.asarray(op, dtype=complex).reshape(2, 2, 2, 2)
    psi = np.tensordot(op, state.tensor(), axes=([2, 3], [axis(a), axis(b)]))
    psi = np.moveaxis(psi, [0, 1], [axis(a), axis(b)])
    return replace(state, amps=psi.reshape(-1))


def _apply_phase(psi: np.ndarray, a: int, b: int, phase: complex) -> None:
    index = [slice(None)] * psi.ndim
    index[axis(a)] = 1
    index[axis(b)] = 1
    psi[tuple(index)] *= phase


def _cluster_tensor(spec: LatticeSpec, inputs: Mapping[int, np.ndarray]) -> np.ndarray:
    """Unnormalized ``(prod S_j) prod CZ |inputs, +...>`` as an n-index tensor."""
    n = spec.n
    check_budget(n)
    factors = [np.asarray(inputs.get(site, KET_PLUS), dtype=complex) for site in range(1, n + 1)]
    psi = factors[0]
    for factor in factors[1:]:
        psi = np.multiply.outer(psi, factor)
    psi = np.array(psi, dtype=complex).reshape((2,) * n)

    for a, b in spec.edges:
        _apply_phase(psi, a, b, -1.0)

    for site, op in sorted(spec.site_ops.items()):
        psi = np.moveaxis(np.tensordot(op, psi, axes=([1], [axis(site)])), 0, axis(site))
    return psi


def build_cluster(
    spec: LatticeSpec,
    input_state: Optional[np.ndarray] = None,
    input_site: int = 1,
) -> PureState:
    """Build the transformed cluster state of a lattice.

    Args:
        spec: Lattice with site operators
        input_state: Optional 2-vector placed on ``input_site`` instead of |+>
        input_site: Site carrying the logical input

    Returns:
        Normalized PureState

    Raises:
        TooManyQubits: If the state exceeds the amplitude budget
    """
    inputs = {}
    if input_state is not None:
        if input_site not in spec.graph:
            raise ValueError(f"Input site {input_site} is not in the lattice")
        inputs[input_site] = np.asarray(input_state, dtype=complex)

    psi = _cluster_tensor(spec, inputs)
    state = PureState.from_tensor(psi)
    logger.debug(f"Built {spec.topology} cluster with {spec.n} sites and {len(spec.site_ops)} operators")
    return state.normalized()


def measure(
    state: PureState,
    site: int,
    basis: MeasurementBasis,
    outcome: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> MeasurementResult:
    """Projectively measure one site.

    Args:
        state: State to measure (not modified)
        site: 1-based site
        basis: Measurement basis; outcome k projects on ``basis.vector(k)``
        outcome: Force this outcome instead of sampling
        rng: Random generator for sampling mode

    Returns:
        MeasurementResult with the Born probability and the normalized post-measurement state

    Raises:
        SiteAlreadyMeasured: If the site was projected before
        ZeroProbabilityBranch: If a forced outcome has probability below 1e-14
    """
    if site in state.measured:
        raise SiteAlreadyMeasured(f"Site {site} was already measured", details={"site": site})

    psi = state.tensor()
    total = np.vdot(state.amps, state.amps).real
    projections = [
        np.tensordot(basis.vector(k).conj(), psi, axes=([0], [axis(site)])) for k in (0, 1)
    ]
    probs = [float(np.vdot(p, p).real / total) for p in projections]

    if outcome is None:
        rng = rng if rng is not None else np.random.default_rng()
        outcome = 0 if rng.random() < probs[0] else 1
    elif probs[outcome] < ZERO_BRANCH_TOL:
        raise ZeroProbabilityBranch(
            f"Outcome {outcome} on site {site} has vanishing probability",
            details={"site": site, "outcome": outcome, "probability": probs[outcome]}
        )

    post = np.moveaxis(np.multiply.outer(basis.vector(outcome), projections[outcome]), 0, axis(site))
    post = post / np.linalg.norm(post)
    return MeasurementResult(
        outcome=int(outcome),
        probability=probs[outcome],
        state=PureState.from_tensor(post, measured=state.measured | {site}),
    )


def extract_map(run: TeleportRun) -> np.ndarray:
    """Linear map from the logical inputs to the unmeasured output sites.

    Each computational basis input is propagated without normalization, every
    listed site is projected on its outcome vector, and the output amplitudes
    (ordered as ``run.output_sites``) become one column.

    Raises:
        ZeroProbabilityBranch: If the projected map vanishes
    """
    spec = run.lattice
    measured = {site for site, _, _ in run.measurements}
    remaining = [s for s in range(1, spec.n + 1) if s not in measured]
    if sorted(remaining) != sorted(run.output_sites):
        raise ValueError(
            f"Unmeasured sites {remaining} differ from output sites {list(run.output_sites)}"
        )

    k = len(run.input_sites)
    columns, weight = [], 0.0
    for bits in itertools.product((0, 1), repeat=k):
        inputs = {site: (KET1 if bit else KET0) for site, bit in zip(run.input_sites, bits)}
        psi = _cluster_tensor(spec, inputs)
        weight += float(np.vdot(psi, psi).real)
        sites = list(range(1, spec.n + 1))
        for site, basis, outcome in sorted(run.measurements, key=lambda t: -t[0]):
            psi = np.tensordot(basis.vector(outcome).conj(), psi, axes=([0], [sites.index(site)]))
            sites.remove(site)
        order = [sites.index(s) for s in run.output_sites]
        columns.append(np.transpose(psi, order).reshape(-1))

    mapping = np.stack(columns, axis=1)
    if np.vdot(mapping, mapping).real < ZERO_BRANCH_TOL * weight:
        raise ZeroProbabilityBranch(
            "Measurement branch has vanishing probability",
            details={"outcomes": [int(o) for _, _, o in run.measurements]}
        )
    return mapping


def extract_teleported(run: TeleportRun) -> np.ndarray:
    """Single-qubit teleported operator of a run (up to global scale)."""
    if len(run.input_sites) != 1 or len(run.output_sites) != 1:
        raise ValueError("extract_teleported needs exactly one input and one output site")
    return extract_map(run)


def reduced_density(state: PureState, subset: Sequence[int]) -> np.ndarray:
    """Partial trace onto ``subset`` (matrix index ordered as given)."""
    subset = list(subset)
    psi = np.moveaxis(state.tensor(), [axis(s) for s in subset], list(range(len(subset))))
    block = psi.reshape(2 ** len(subset), -1)
    rho = block @ block.conj().T
    return rho / np.trace(rho).real


def b_site_density(spec: LatticeSpec, thetas: Mapping[int, float], site: int) -> np.ndarray:
    """Closed-form single-site density matrix of a B-transformed cluster.

    The lattice carries ``sqrt(2) diag(cos theta_k, sin theta_k)`` on the sites in
    ``thetas``; other sites are untouched (theta = pi/4).
    """
    theta = thetas.get(site, np.pi / 4)
    coherence = 0.5 * np.sin(2 * theta)
    for j in spec.neighbors(site):
        coherence *= np.cos(2 * thetas.get(j, np.pi / 4))
    return np.array(
        [[np.cos(theta) ** 2, coherence], [coherence, np.sin(theta) ** 2]], dtype=complex
    )


def b_diagonal(theta: float) -> np.ndarray:
    """B-type operator ``sqrt(2) diag(cos theta, sin theta)``."""
    return d_matrix(theta, np.sqrt(2.0))


def schmidt_spectrum(state: PureState, left: Sequence[int]) -> np.ndarray:
    """Descending Schmidt coefficients across the cut ``left | rest``."""
    left = list(left)
    if not left or len(left) >= state.n:
        raise ValueError("Bipartition must be nontrivial")
    psi = np.moveaxis(state.tensor(), [axis(s) for s in left], list(range(len(left))))
    values = np.linalg.svd(psi.reshape(2 ** len(left), -1), compute_uv=False)
    return values / np.linalg.norm(values)


def expectation(state: PureState, ops: Mapping[int, Operator]) -> float:
    """Real part of ``<psi| prod_site O_site |psi> / <psi|psi>``."""
    acted = state
    for site, op in ops.items():
        acted = apply_local(acted, site, as_operator(op))
    return float(np.real(np.vdot(state.amps, acted.amps)) / state.norm**2)


def two_point(
    state: PureState,
    a: int,
    op_a: Operator,
    b: int,
    op_b: Operator,
    connected: bool = True,
) -> float:
    """Two-point correlation ``<A_a B_b> - <A_a><B_b>`` (raw value when not connected)."""
    if a == b:
        raise ValueError("Correlator sites must differ")
    joint = expectation(state, {a: op_a, b: op_b})
    if not connected:
        return joint
    return joint - expectation(state, {a: op_a}) * expectation(state, {b: op_b})


def stabilizer_residual(state: PureState, spec: LatticeSpec, site: int) -> float:
    """``|| X_i prod_{j in N(i)} Z_j |psi> - |psi> ||`` for a normalized state."""
    acted = apply_local(state, site, X)
    for j in spec.neighbors(site):
        acted = apply_local(acted, j, Z)
    return float(np.linalg.norm(acted.amps - state.amps))


def weighted_graph_state(n: int, weights: Union[Mapping, Sequence[float]]) -> PureState:
    """``prod CP(phi_ij) |+>^n``; a sequence gives chain weights ``phi_{i,i+1}``."""
    check_budget(n)
    if not isinstance(weights, Mapping):
        weights = {(i, i + 1): phi for i, phi in enumerate(weights, start=1)}
    psi = np.full((2,) * n, 2 ** (-n / 2), dtype=complex)
    for (a, b), phi in weights.items():
        _apply_phase(psi, a, b, np.exp(1j * phi))
    return PureState.from_tensor(psi)


def weighted_chain_spectra(phi12: float, phi23: float) -> list[tuple[float, float]]:
    """Single-qubit spectra (larger, smaller) of the weighted three-site chain."""
    def pair(x):
        return 0.5 * (1 + abs(x)), 0.5 * (1 - abs(x))

    a, b = np.cos(phi12 / 2), np.cos(phi23 / 2)
    return [pair(a), pair(a * b), pair(b)]


def b_chain_spectra(theta: float) -> list[tuple[float, float]]:
    """Single-qubit spectra of the three-site chain with a B-type centre."""
    c = abs(np.cos(2 * theta))
    return [(0.5 * (1 + c), 0.5 * (1 - c))] * 3


def spectrum_mismatch(theta: float, phi12: float, phi23: float) -> float:
    """Largest eigenvalue difference between the two three-site families."""
    return float(max(
        abs(w[0] - b[0])
        for w, b in zip(weighted_chain_spectra(phi12, phi23), b_chain_spectra(theta))
    ))


def fidelity(a: Union[PureState, np.ndarray], b: Union[PureState, np.ndarray]) -> float:
    """``|<a|b>|^2`` after normalization."""
    va = a.amps if isinstance(a, PureState) else np.asarray(a, dtype=complex).reshape(-1)
    vb = b.amps if isinstance(b, PureState) else np.asarray(b, dtype=complex).reshape(-1)
    if va.size != vb.size:
        raise ValueError("States have different dimensions")
    overlap = np.vdot(va, vb)
    return float(abs(overlap) ** 2 / (np.vdot(va, va).real * np.vdot(vb, vb).real))


def dump_amplitudes(state: PureState, file_path: Path, fmt: str = "csv") -> Path:
    """Write amplitudes for debugging.

    The binary format is ``b"SVEC"``, a little-endian uint32 qubit count, then
    little-endian complex128 amplitudes. The CSV format has ``index,re,im`` rows.
    """
    file_path = Path(file_path)
    if fmt == "bin":
        payload = b"SVEC" + struct.pack("<I", state.n) + state.amps.astype("<c16").tobytes()
        atomic_write(file_path, payload)
        return file_path

    lines = ["index,re,im"]
    lines += [f"{k},{repr(float(a.real))},{repr(float(a.imag))}" for k, a in enumerate(state.amps)]
    atomic_write(file_path, "\n".join(lines) + "\n")
    return file_path


def load_amplitudes(file_path: Path) -> PureState:
    """Read a state written by dump_amplitudes."""
    file_path = Path(file_path)
    raw = file_path.read_bytes()
    if raw[:4] == b"SVEC":
        (n,) = struct.unpack("<I", raw[4:8])
        return PureState(n=n, amps=np.frombuffer(raw[8:], dtype="<c16").astype(complex))

    rows = raw.decode("utf-8").strip().splitlines()[1:]
    amps = np.array([complex(float(r.split(",")[1]), float(r.split(",")[2])) for r in rows])
    return PureState(n=int(np.log2(len(amps))), amps=amps)
