"""Classification of local SLOCC operators and the teleportation strategies.

An invertible 2x2 operator ``S`` is N-type when ``S^dagger S`` has equal
diagonal entries and B-type when ``S^dagger S`` is diagonal. N-type operators
factor as ``u D(theta) H Rz(gamma)`` and B-type operators as ``u D(theta)``,
with ``u`` unitary and ``D`` positive diagonal.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NotBType, NotNType
from .qmath import H, X, Svd2, d_matrix, dagger, rz, svd2

logger = logging.getLogger(__name__)

CLASSIFY_TOL = 1e-10


@dataclass(frozen=True)
class SloccOp:
    """An invertible local operator with its classification flags."""

    matrix: np.ndarray
    svd: Svd2
    is_n_type: bool
    is_b_type: bool
    is_unitary: bool

    @property
    def theta(self) -> float:
        return self.svd.theta

    @property
    def kappa(self) -> float:
        return self.svd.kappa

    @property
    def lam(self) -> float:
        """Ratio of the smaller to the larger singular value."""
        return float(np.tan(self.svd.theta))

    @property
    def kind(self) -> str:
        if self.is_unitary:
            return "unitary"
        if self.is_n_type:
            return "N"
        if self.is_b_type:
            return "B"
        return "generic"


@dataclass(frozen=True)
class NTypeCanon:
    """Canonical N-type factorization ``u . D(theta, kappa) . H . Rz(gamma)``."""

    u: np.ndarray
    theta: float
    gamma: float
    kappa: float = float(np.sqrt(2.0))

    def matrix(self) -> np.ndarray:
        return self.u @ d_matrix(self.theta, self.kappa) @ H @ rz(self.gamma)

    @property
    def gram(self) -> np.ndarray:
        """``N^dagger N``, the only part that enters outcome probabilities."""
        m = self.matrix()
        return dagger(m) @ m


@dataclass(frozen=True)
class BTypeCanon:
    """Canonical B-type factorization ``u . D(theta, kappa)``."""

    u: np.ndarray
    theta: float
    kappa: float = float(np.sqrt(2.0))

    @property
    def eps_im(self) -> float:
        """Imaginary z-rotation angle ``ln cot theta`` carried by the operator."""
        return float(np.log(1.0 / np.tan(self.theta)))

    @property
    def lam(self) -> float:
        return float(np.tan(self.theta))

    def matrix(self) -> np.ndarray:
        return self.u @ d_matrix(self.theta, self.kappa)

    def as_rotation(self) -> np.ndarray:
        """``u . Rz(i eps_im)``, proportional to the operator."""
        return self.u @ rz(1j * self.eps_im)


@dataclass(frozen=True)
class Strategy2Gate:
    """Teleported gate ``X^m H Rz(angle)`` of a Strategy II measurement."""

    angle: complex
    x_byproduct: bool

    def matrix(self) -> np.ndarray:
        gate = H @ rz(self.angle)
        return X @ gate if self.x_byproduct else gate


def classify(s: np.ndarray, tol: float = CLASSIFY_TOL) -> SloccOp:
    """Classify an invertible local operator.

    The decision is made on ``S / ||S||_F`` so it does not depend on scale.

    Raises:
        SingularInput: If s is not invertible
    """
    s = np.asarray(s, dtype=complex)
    decomposition = svd2(s)
    normalized = s / np.linalg.norm(s)
    gram = dagger(normalized) @ normalized

    is_n_type = abs(gram[0, 0] - gram[1, 1]) < tol
    is_b_type = abs(gram[0, 1]) < tol
    is_unitary = abs(decomposition.theta - np.pi / 4) < tol

    logger.debug(
        f"Classified operator: theta={decomposition.theta:.6f} "
        f"n_type={is_n_type} b_type={is_b_type} unitary={is_unitary}"
    )
    return SloccOp(
        matrix=s,
        svd=decomposition,
        is_n_type=bool(is_n_type),
        is_b_type=bool(is_b_type),
        is_unitary=bool(is_unitary),
    )


def n_canon(op: SloccOp, tol: float = CLASSIFY_TOL) -> NTypeCanon:
    """Factor an N-type operator as ``u D(theta) H Rz(gamma)``.

    Theta is returned in (0, pi/4]; for unitary operators theta = pi/4 and
    gamma = 0.

    Raises:
        NotNType: If op is not N-type
    """
    if not op.is_n_type:
        raise NotNType(
            "Operator is not N-type",
            details={"theta": op.theta}
        )

    s = op.matrix
    gram = dagger(s) @ s
    t00 = float(np.real(gram[0, 0] + gram[1, 1])) / 2.0
    kappa = float(np.sqrt(2.0 * t00))
    ratio = abs(gram[0, 1]) / t00

    if op.is_unitary or ratio < tol:
        theta, gamma = np.pi / 4, 0.0
    else:
        theta = 0.5 * float(np.arccos(min(ratio, 1.0)))
        gamma = float(np.mod(np.angle(gram[0, 1]), 2 * np.pi))

    u = s @ rz(-gamma) @ H @ np.linalg.inv(d_matrix(theta, kappa))
    return NTypeCanon(u=u, theta=theta, gamma=gamma, kappa=kappa)


def b_canon(op: SloccOp) -> BTypeCanon:
    """Factor a B-type operator as ``u D(theta)``.

    Raises:
        NotBType: If op is not B-type
    """
    if not op.is_b_type:
        raise NotBType(
            "Operator is not B-type",
            details={"theta": op.theta}
        )

    s = op.matrix
    gram = dagger(s) @ s
    t0, t1 = float(np.real(gram[0, 0])), float(np.real(gram[1, 1]))
    theta = float(np.arctan2(np.sqrt(t1), np.sqrt(t0)))
    kappa = float(np.sqrt(t0 + t1))
    u = s @ np.linalg.inv(d_matrix(theta, kappa))
    return BTypeCanon(u=u, theta=theta, kappa=kappa)


def strategy1_byproduct_angle(theta: float, gamma: float, xi: float) -> float:
    """Rotation angle mu' of the outcome-1 byproduct ``Rx(mu') H Rz(xi)``.

    Satisfies ``tan(mu'/2) = (1 - c cos(gamma - xi)) / (c sin(gamma - xi))``
    with ``c = cos 2 theta``; the unitary case gives pi.
    """
    c = np.cos(2 * theta)
    delta = gamma - xi
    return float(np.pi + 2.0 * np.arctan2(-c * np.sin(delta), 1.0 - c * np.cos(delta)))


def strategy1_probs(theta: float, xi: float, gamma: float = 0.0) -> tuple[float, float]:
    """Outcome probabilities of a Strategy I measurement.

    Independent of the logical input and of the remainder of an N-U-N chain.

    Returns:
        (p0, p1)
    """
    c = np.cos(2 * theta)
    p0 = np.sin(2 * theta) ** 2 / (2.0 * (1.0 - c * np.cos(gamma - xi)))
    p0 = float(min(max(p0, 0.0), 1.0))
    return p0, 1.0 - p0


def mean_strategy1_failure(theta: float, quadrature: bool = False) -> float:
    """Outcome-1 probability averaged over the measurement angle.

    Args:
        theta: Singular-value angle of the N-type operator
        quadrature: Integrate numerically instead of using ``1 - sin(2 theta)/2``
    """
    if not quadrature:
        return float(1.0 - np.sin(2 * theta) / 2.0)

    value, _ = integrate.quad(
        lambda xi: strategy1_probs(theta, xi)[1],
        0.0,
        2 * np.pi,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200,
    )
    return float(value / (2 * np.pi))


def strategy2_gate(theta: float, beta_prime: float, m: int) -> Strategy2Gate:
    """Gate ``X^m H Rz(beta' + i ln cot theta)`` teleported by Strategy II."""
    angle = complex(beta_prime, np.log(1.0 / np.tan(theta)))
    return Strategy2Gate(angle=angle, x_byproduct=bool(m))
