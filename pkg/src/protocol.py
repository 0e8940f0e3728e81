"""Measurement protocols on transformed cluster wires.

Logical states are tracked behind a Pauli frame ``X^x Z^z``. A program segment
``H Rz(a)`` is teleported by measuring at angle ``(-1)^x a``; outcome ``m``
moves the frame to ``(z xor m, x)``.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import ChainExhausted, SingularInput, ZeroProbabilityBranch
from .qmath import H, I2, KET0, KET1, X, Z, dagger, d_matrix, is_invertible, kron, operator_distance, rx, rz
from .slocc import b_canon, classify, n_canon, strategy1_byproduct_angle
from .statevec import (
    LatticeSpec,
    MeasurementBasis,
    PureState,
    TeleportRun,
    build_cluster,
    extract_map,
    fidelity,
    measure,
)
from .utils import write_jsonl
from .walk import backstep_probability

logger = logging.getLogger(__name__)

ERROR_TOL = 1e-12
BALANCE_TOL = 1e-9
ZERO_BRANCH_TOL = 1e-14


@dataclass(frozen=True)
class PauliFrame:
    """Byproduct ``X^x Z^z`` in front of the logical state."""

    x: int = 0
    z: int = 0

    @property
    def sign(self) -> int:
        """Sign applied to measurement angles, ``(-1)^x``."""
        return -1 if self.x else 1

    def matrix(self) -> np.ndarray:
        return np.linalg.matrix_power(X, self.x) @ np.linalg.matrix_power(Z, self.z)

    def push(self, outcome: int) -> "PauliFrame":
        """Frame after teleporting ``H Rz(.)`` with the given outcome."""
        return PauliFrame(x=self.z ^ int(outcome), z=self.x)

    def with_z(self, flag: bool) -> "PauliFrame":
        return PauliFrame(x=self.x, z=self.z ^ int(flag))


@dataclass
class MeasurementEntry:
    site: int
    role: str
    basis: dict
    outcome: int
    probability: float
    frame: tuple
    pending: Optional[complex] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["frame"] = list(self.frame)
        if self.pending is not None:
            data["pending"] = [float(np.real(self.pending)), float(np.imag(self.pending))]
        return data


@dataclass
class MeasurementRecord:
    """Ordered audit log of a protocol run."""

    entries: list = field(default_factory=list)

    def append(self, entry: MeasurementEntry) -> None:
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def outcomes(self) -> list[int]:
        return [e.outcome for e in self.entries]

    @property
    def path_probability(self) -> float:
        return float(np.prod([e.probability for e in self.entries])) if self.entries else 1.0

    def to_jsonl(self, file_path: Path) -> Path:
        return write_jsonl(file_path, [e.to_dict() for e in self.entries])


@dataclass(frozen=True)
class RotationTarget:
    """Euler rotation ``Rx(zeta) Rz(eta) Rx(xi)``."""

    zeta: float
    eta: float
    xi: float

    def unitary(self) -> np.ndarray:
        return rx(self.zeta) @ rz(self.eta) @ rx(self.xi)

    def segments(self) -> list[float]:
        """Angles of the ``H Rz(a)`` segments in teleportation order."""
        return [0.0, self.xi, self.eta, self.zeta]


def teleported_operator(op: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """``H diag(<m|S|0>, <m|S|1>)`` for a site operator S projected on ``<m|``."""
    return H @ np.diag([np.vdot(vector, op[:, 0]), np.vdot(vector, op[:, 1])])


class WireSimulator:
    """Exact logical-level simulation of a measured 1D chain.

    The logical 2-vector lives on the current site. Environment matrices
    ``Q_j`` summarise everything to the right, so Born probabilities cost a
    2x2 contraction per measurement and chains can be hundreds of sites long.
    """

    def __init__(self, ops: Sequence[np.ndarray], psi: np.ndarray):
        self.ops = [np.asarray(op, dtype=complex) for op in ops]
        if len(self.ops) < 2:
            raise ValueError("A wire needs at least two sites")
        for site, op in enumerate(self.ops, start=1):
            if not is_invertible(op):
                raise SingularInput(f"Operator on site {site} is not invertible", details={"site": site})
        psi = np.asarray(psi, dtype=complex)
        self.state = psi / np.linalg.norm(psi)
        self.position = 1
        self._env = self._environments()

    def _environments(self) -> list:
        count = len(self.ops)
        env = [None] * (count + 2)
        last = self.ops[-1]
        q = dagger(last) @ last
        env[count] = q / np.trace(q).real
        for j in range(count - 1, 0, -1):
            op = self.ops[j - 1]
            q = sum(
                dagger(k) @ env[j + 1] @ k
                for k in (teleported_operator(op, KET0), teleported_operator(op, KET1))
            )
            env[j] = q / np.trace(q).real
        return env

    @property
    def remaining(self) -> int:
        """Sites that can still be measured before the last one."""
        return len(self.ops) - self.position

    def probabilities(self, basis: MeasurementBasis) -> tuple[float, float]:
        op, q_next = self.ops[self.position - 1], self._env[self.position + 1]
        weights = []
        for k in (0, 1):
            v = teleported_operator(op, basis.vector(k)) @ self.state
            weights.append(float(np.real(np.vdot(v, q_next @ v))))
        total = sum(weights)
        return weights[0] / total, weights[1] / total

    def measure(
        self,
        basis: MeasurementBasis,
        outcome: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[int, float]:
        """Measure the current site and move the logical state one site right.

        Returns:
            (outcome, probability)
        """
        if self.remaining < 1:
            raise ValueError("No measurable site left on the wire")
        probs = self.probabilities(basis)
        if outcome is None:
            rng = rng if rng is not None else np.random.default_rng()
            outcome = 0 if rng.random() < probs[0] else 1
        elif probs[outcome] < ZERO_BRANCH_TOL:
            raise ZeroProbabilityBranch(
                f"Outcome {outcome} on site {self.position} has vanishing probability",
                details={"site": self.position, "outcome": outcome}
            )
        mapped = teleported_operator(self.ops[self.position - 1], basis.vector(outcome)) @ self.state
        self.state = mapped / np.linalg.norm(mapped)
        self.position += 1
        return int(outcome), probs[outcome]


class _Outcomes:
    """Forced outcomes first, then samples."""

    def __init__(self, forced: Optional[Iterable[int]], rng: Optional[np.random.Generator]):
        self._forced: Iterator[int] = iter(forced or [])
        self.rng = rng

    def next(self) -> Optional[int]:
        return next(self._forced, None)


@dataclass
class CompileResult:
    state: np.ndarray
    frame: PauliFrame
    record: MeasurementRecord
    fidelity: float


@dataclass
class NunResult:
    success: bool
    output_site: int
    state: np.ndarray
    frame: PauliFrame
    record: MeasurementRecord
    fidelity: float
    failures: int

    @property
    def sites_used(self) -> int:
        return len(self.record)


@dataclass
class BubResult:
    success: bool
    output_site: int
    state: np.ndarray
    frame: PauliFrame
    record: MeasurementRecord
    fidelity: float
    phases: list

    @property
    def sites_used(self) -> int:
        return len(self.record)


@dataclass
class BundoResult:
    success: bool
    steps: int
    path: list
    raw: list
    effective: list
    probability: float


@dataclass
class EntangleResult:
    outcomes: tuple
    mapping: np.ndarray
    expected: np.ndarray
    locals: tuple

    @property
    def distance(self) -> float:
        return operator_distance(self.mapping, self.expected)

    def entangling_core(self) -> np.ndarray:
        """The map with the local output factors removed."""
        return np.linalg.inv(kron(*self.locals)) @ self.mapping

    def cz_equivalence(self, tol: float = 1e-9) -> bool:
        """``X⊗X . Rz(pi/2)⊗Rz(pi/2) . core . X⊗X`` is proportional to CZ."""
        xx = kron(X, X)
        candidate = xx @ kron(rz(np.pi / 2), rz(np.pi / 2)) @ self.entangling_core() @ xx
        return operator_distance(candidate, np.diag([1, 1, 1, -1]).astype(complex)) < tol


def _normalized(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


def _wrap(angle: float) -> float:
    return float(np.angle(np.exp(1j * angle)))


def compile_cluster(
    target: RotationTarget,
    psi: np.ndarray,
    outcomes: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
) -> CompileResult:
    """Teleport ``target`` through a five-site cluster chain on the dense oracle.

    Returns:
        CompileResult whose state is ``frame . U . psi`` up to phase
    """
    psi = _normalized(psi)
    state = build_cluster(LatticeSpec.chain(5), input_state=psi, input_site=1)
    frame, record = PauliFrame(), MeasurementRecord()
    source = _Outcomes(outcomes, rng)
    vectors = []

    for site, a in enumerate(target.segments(), start=1):
        basis = MeasurementBasis.xy(frame.sign * a)
        result = measure(state, site, basis, outcome=source.next(), rng=rng)
        state = result.state
        vectors.append(basis.vector(result.outcome))
        frame = frame.push(result.outcome)
        record.append(MeasurementEntry(
            site=site, role="cluster", basis=basis.describe(), outcome=result.outcome,
            probability=result.probability, frame=(frame.x, frame.z),
        ))

    out = state.tensor()
    for vector in vectors:
        out = np.tensordot(vector.conj(), out, axes=([0], [0]))
    out = _normalized(out)
    expected = frame.matrix() @ target.unitary() @ psi
    return CompileResult(state=out, frame=frame, record=record, fidelity=fidelity(out, expected))


def strategy1_basis(n_op: np.ndarray, xi: float) -> MeasurementBasis:
    """Strategy I basis ``{(N^dagger)^-1 Rz(-xi) H|0>, N Rz(-xi) H|1>}``."""
    n_op = np.asarray(n_op, dtype=complex)
    m = np.linalg.inv(dagger(n_op)) @ rz(-xi) @ H @ KET0
    m_perp = n_op @ rz(-xi) @ H @ KET1
    basis = MeasurementBasis.from_vectors(m, m_perp, tol=1e-10)
    return MeasurementBasis(m=basis.m, m_perp=basis.m_perp, xi=xi, label="strategy1")


def epsilon_angle(theta: float, xi1: float, gamma: float = np.pi / 2) -> float:
    """Z-rotation error left by a failed Strategy I attempt, wrapped to (-pi, pi]."""
    return _wrap(strategy1_byproduct_angle(theta, gamma, xi1) - np.pi)


def strategy2_basis(b_op: np.ndarray, beta_prime: float) -> MeasurementBasis:
    """Strategy II basis ``{u Rz(-beta') H|0>, u Rz(-beta') H|1>}``; u from b_canon."""
    canon = b_canon(classify(b_op))
    basis = MeasurementBasis.from_vectors(
        canon.u @ rz(-beta_prime) @ H @ KET0, canon.u @ rz(-beta_prime) @ H @ KET1, tol=1e-10
    )
    return MeasurementBasis(m=basis.m, m_perp=basis.m_perp, xi=beta_prime, label="strategy2")


def nun_chain_ops(
    theta: float,
    gamma,
    length: int,
    rng: Optional[np.random.Generator] = None,
) -> list[np.ndarray]:
    """N-U-N wire: ``D(theta) H Rz(gamma)`` on odd sites, identity on even sites.

    ``gamma="random"`` draws an independent uniform angle for every odd site.
    """
    ops = []
    for site in range(1, length + 1):
        if site % 2 == 0:
            ops.append(I2.copy())
            continue
        g = rng.uniform(0, 2 * np.pi) if gamma == "random" else float(gamma)
        ops.append(d_matrix(theta, np.sqrt(2.0)) @ H @ rz(g))
    return ops


def bub_chain_ops(thetas, length: int) -> list[np.ndarray]:
    """B-U-B wire: ``sqrt 2 diag(cos, sin)`` on odd sites, identity on even sites.

    ``thetas`` is one angle or a list cycled over the odd sites.
    """
    thetas = [thetas] if np.isscalar(thetas) else list(thetas)
    ops = []
    for site in range(1, length + 1):
        if site % 2 == 0:
            ops.append(I2.copy())
        else:
            ops.append(d_matrix(thetas[(site // 2) % len(thetas)], np.sqrt(2.0)))
    return ops


def _exhausted(name: str, wire: WireSimulator, record: MeasurementRecord) -> ChainExhausted:
    return ChainExhausted(
        f"{name} ran out of sites before completing",
        details={"sites": len(wire.ops), "measured": len(record)},
        record=record,
    )


def _unitary_sites(ops: Sequence[np.ndarray]) -> None:
    for site in range(2, len(ops) + 1, 2):
        if not classify(ops[site - 1]).is_unitary:
            raise ValueError(f"Even site {site} must carry a unitary operator")


def nun_rotate(
    ops: Sequence[np.ndarray],
    target: RotationTarget,
    psi: np.ndarray,
    outcomes: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
    max_sites: Optional[int] = None,
) -> NunResult:
    """Repeat-until-success rotation on an N-U-N wire.

    Odd sites carry N-type operators and are measured with Strategy I; even
    sites carry unitaries and teleport deterministically. A failed odd attempt
    leaves a z-rotation error that the next odd site undoes after the even site
    in between teleports a plain H.

    Args:
        ops: Site operators, site 1 first
        target: Rotation to apply
        psi: Logical input on site 1
        outcomes: Optional forced outcomes, consumed in order before sampling
        rng: Random generator for sampled outcomes
        max_sites: Truncate the wire to this many sites

    Returns:
        NunResult with the logical state on the output site

    Raises:
        NotNType: If an odd site is not N-type
        ChainExhausted: If the wire ends before the rotation is complete
    """
    ops = list(ops)[:max_sites] if max_sites else list(ops)
    _unitary_sites(ops)
    canon = {site: n_canon(classify(ops[site - 1])) for site in range(1, len(ops) + 1, 2)}
    psi = _normalized(psi)
    wire = WireSimulator(ops, psi)
    segments = target.segments()
    source = _Outcomes(outcomes, rng)
    frame, record = PauliFrame(), MeasurementRecord()
    seg, pending, failures = 0, None, 0

    while seg < len(segments) or pending is not None:
        site = wire.position
        if wire.remaining < 1:
            raise _exhausted("N-U-N rotation", wire, record)
        op = ops[site - 1]

        if site % 2:
            a = -pending if pending is not None else segments[seg]
            role = "correction" if pending is not None else "odd"
            xi = frame.sign * a
            basis = strategy1_basis(op, xi)
            outcome, prob = wire.measure(basis, source.next(), source.rng)
            error = 0.0
            if outcome:
                c = canon[site]
                error = frame.sign * epsilon_angle(c.theta, xi, c.gamma)
            if abs(error) > ERROR_TOL:
                pending = error
                failures += 1
            else:
                pending = None
                seg += 1
        else:
            role = "hold" if pending is not None else "even"
            a = 0.0 if pending is not None else segments[seg]
            basis = MeasurementBasis.xy(frame.sign * a).rotated(op)
            outcome, prob = wire.measure(basis, source.next(), source.rng)
            if pending is None:
                seg += 1

        frame = frame.push(outcome)
        record.append(MeasurementEntry(
            site=site, role=role, basis=basis.describe(), outcome=outcome,
            probability=prob, frame=(frame.x, frame.z), pending=pending,
        ))
        logger.debug(f"N-U-N site {site} ({role}) outcome {outcome} p={prob:.4f}")

    expected = frame.matrix() @ target.unitary() @ psi
    return NunResult(
        success=True,
        output_site=wire.position,
        state=wire.state,
        frame=frame,
        record=record,
        fidelity=fidelity(wire.state, expected),
        failures=failures,
    )


def nun_decouple(
    state: PureState,
    link_site: int,
    wire_sites: Sequence[int],
    link_op: Optional[np.ndarray] = None,
    outcome: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[PureState, dict]:
    """Cut a vertical link by a Z measurement of its unitary middle site.

    Returns:
        (post-measurement state, {wire site: True when a Z byproduct is recorded})
    """
    basis = MeasurementBasis.computational()
    if link_op is not None:
        if not classify(link_op).is_unitary:
            raise ValueError("The link site must carry a unitary operator")
        basis = basis.rotated(np.asarray(link_op, dtype=complex))
    result = measure(state, link_site, basis, outcome=outcome, rng=rng)
    flags = {site: bool(result.outcome) for site in wire_sites}
    logger.debug(f"Decoupled link {link_site} with outcome {result.outcome}")
    return result.state, flags


ENTANGLE_EDGES = [(1, 2), (2, 3), (1, 4), (3, 5)]


def nun_entangle(
    n_ops: tuple[np.ndarray, np.ndarray],
    u2: np.ndarray,
    outcomes: tuple[int, int, int],
) -> EntangleResult:
    """Two-qubit gate through a vertical N-U-N link.

    Sites 1 and 3 carry the N-type operators and are measured with Strategy I
    at angle 0; site 2 carries ``u2`` and is measured in the rotated Y basis.
    Wire outputs are sites 4 (after 1) and 5 (after 3).
    """
    n1, n3 = (np.asarray(op, dtype=complex) for op in n_ops)
    u2 = np.asarray(u2, dtype=complex)
    m1, m2, m3 = (int(m) for m in outcomes)
    lattice = LatticeSpec.from_edges(5, ENTANGLE_EDGES).with_ops({1: n1, 2: u2, 3: n3})
    run = TeleportRun(
        lattice=lattice,
        input_sites=(1, 3),
        output_sites=(4, 5),
        measurements=(
            (1, strategy1_basis(n1, 0.0), m1),
            (2, MeasurementBasis.pauli("Y").rotated(u2), m2),
            (3, strategy1_basis(n3, 0.0), m3),
        ),
    )
    mapping = extract_map(run)

    def local(n_op, m_own):
        c = n_canon(classify(n_op))
        mu = strategy1_byproduct_angle(c.theta, c.gamma, 0.0)
        byproduct = rx(mu - np.pi) if m_own else I2
        return byproduct @ np.linalg.matrix_power(X, (m_own + m2) % 2) @ H

    locals_ = (local(n1, m1), local(n3, m3))
    expected = kron(*locals_) @ np.diag([1, 1j, 1j, 1])
    return EntangleResult(outcomes=(m1, m2, m3), mapping=mapping, expected=expected, locals=locals_)


def bub_rotate(
    ops: Sequence[np.ndarray],
    target: RotationTarget,
    psi: np.ndarray,
    outcomes: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
    max_sites: Optional[int] = None,
) -> BubResult:
    """Probabilistic rotation on a B-U-B wire.

    Every odd (B) measurement adds ``(-1)^x (beta' + i ln cot theta)`` to the
    z angle of the current odd segment. ``beta'`` keeps the real part on the
    segment angle; the imaginary part performs a walk driven by the even
    outcomes and the segment completes once it returns to zero. Meanwhile the
    even sites teleport plain H.

    Raises:
        NotBType: If an odd site is not B-type
        ChainExhausted: If the wire ends before the rotation is complete
    """
    ops = list(ops)[:max_sites] if max_sites else list(ops)
    _unitary_sites(ops)
    canon = {site: b_canon(classify(ops[site - 1])) for site in range(1, len(ops) + 1, 2)}
    psi = _normalized(psi)
    wire = WireSimulator(ops, psi)
    segments = target.segments()
    source = _Outcomes(outcomes, rng)
    frame, record = PauliFrame(), MeasurementRecord()
    seg, phases = 0, []
    trace = None
    real, imag = 0.0, 0.0

    while seg < len(segments):
        site = wire.position
        if wire.remaining < 1:
            raise _exhausted("B-U-B rotation", wire, record)
        op = ops[site - 1]

        if site % 2:
            if trace is None:
                trace, real, imag = [0.0], 0.0, 0.0
            a = segments[seg]
            beta = frame.sign * (a - real)
            basis = strategy2_basis(op, beta)
            real += frame.sign * beta
            imag += frame.sign * canon[site].eps_im
            outcome, prob = wire.measure(basis, source.next(), source.rng)
            role, pending = "odd", complex(0.0, imag)
            if abs(imag) < BALANCE_TOL:
                phases.append(trace)
                trace, pending = None, None
                seg += 1
        else:
            if trace is not None:
                basis = MeasurementBasis.xy(0.0).rotated(op)
                role = "hold"
            else:
                basis = MeasurementBasis.xy(frame.sign * segments[seg]).rotated(op)
                role = "even"
                seg += 1
            outcome, prob = wire.measure(basis, source.next(), source.rng)
            pending = complex(0.0, imag) if trace is not None else None
            if trace is not None:
                trace.append(imag)

        frame = frame.push(outcome)
        record.append(MeasurementEntry(
            site=site, role=role, basis=basis.describe(), outcome=outcome,
            probability=prob, frame=(frame.x, frame.z), pending=pending,
        ))

    expected = frame.matrix() @ target.unitary() @ psi
    return BubResult(
        success=True,
        output_site=wire.position,
        state=wire.state,
        frame=frame,
        record=record,
        fidelity=fidelity(wire.state, expected),
        phases=phases,
    )


def _bundo_lattice(lam: float, max_even: int) -> LatticeSpec:
    n = 2 * max_even + 2
    b = np.diag([lam, 1.0]).astype(complex)
    ops = {site: b for site in [1] + list(range(3, 2 * max_even + 2, 2))}
    return LatticeSpec.chain(n).with_ops(ops)


def bundo_vertical(
    lam: float,
    max_even: int,
    mode: str = "sample",
    rng: Optional[np.random.Generator] = None,
) -> BundoResult:
    """Walk of the vertical B-undo chain until absorption at 0 or the budget.

    ``sample`` draws steps from the closed-form back-step probabilities;
    ``oracle`` measures the dense chain in the X basis and maps each raw even
    outcome to the effective step ``e_j = r_j xor e_{j-1}``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    k, path, raw, effective, prob = 1, [1], [], [], 1.0

    if mode == "sample":
        for _ in range(max_even):
            p_back = backstep_probability(lam, k)
            e = int(rng.random() < p_back)
            prob *= p_back if e else 1 - p_back
            effective.append(e)
            k += -1 if e else 1
            path.append(k)
            if k == 0:
                break
        return BundoResult(k == 0, len(effective), path, raw, effective, prob)

    if mode != "oracle":
        raise ValueError(f"Unknown mode '{mode}'")

    state = build_cluster(_bundo_lattice(lam, max_even))
    x_basis = MeasurementBasis.pauli("X")
    previous = 0
    for j in range(1, max_even + 1):
        odd_site = 2 * j - 1
        state = measure(state, odd_site, x_basis, rng=rng).state
        result = measure(state, 2 * j, x_basis, rng=rng)
        state = result.state
        e = result.outcome ^ previous
        raw.append(result.outcome)
        effective.append(e)
        prob *= result.probability
        previous = e
        k += -1 if e else 1
        path.append(k)
        if k == 0:
            break
    return BundoResult(k == 0, len(effective), path, raw, effective, prob)


def bundo_oracle_table(lam: float, max_steps: int) -> list[dict]:
    """Closed-form against Born back-step probability for every reachable history.

    Odd outcomes are fixed to 0; they do not influence the even statistics.
    """
    base = build_cluster(_bundo_lattice(lam, max_steps))
    x_basis = MeasurementBasis.pauli("X")
    rows = []

    def visit(state, history, k, previous):
        step = len(history) + 1
        if k == 0 or step > max_steps:
            return
        state = measure(state, 2 * step - 1, x_basis, outcome=0).state
        back_raw = 1 ^ previous
        result = measure(state, 2 * step, x_basis, outcome=back_raw)
        rows.append({
            "history": "".join(str(e) for e in history),
            "k": k,
            "formula": backstep_probability(lam, k),
            "born": result.probability,
        })
        visit(result.state, history + [1], k - 1, 1)
        forward = measure(state, 2 * step, x_basis, outcome=1 ^ back_raw)
        visit(forward.state, history + [0], k + 1, 0)

    visit(base, [], 1, 0)
    return rows
