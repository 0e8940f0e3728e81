"""Small dense complex linear algebra: gates, Kronecker products, 2x2 SVD.

All matrices are numpy ``complex128`` arrays. Rotations use the convention
``Rz(xi) = diag(exp(-i xi/2), exp(i xi/2))`` and ``Rx(xi) = H Rz(xi) H``; both
accept complex angles, in which case they are not unitary and are never
renormalized here.
"""

from dataclasses import dataclass
from enum import Enum
from functools import reduce

import numpy as np

from .errors import SingularInput

DEFAULT_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_PHASE = np.array([[1, 0], [0, 1j]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS = H @ KET0
KET_MINUS = H @ KET1


class GateKind(str, Enum):
    """Supported gate families."""

    X = "X"
    Y = "Y"
    Z = "Z"
    H = "H"
    RZ = "RZ"
    RX = "RX"
    CZ = "CZ"
    CP = "CP"


@dataclass(frozen=True)
class Gate:
    """A gate with an optional (possibly complex) angle."""

    kind: GateKind
    angle: complex = 0.0


@dataclass(frozen=True)
class Svd2:
    """Singular value decomposition ``m = u . D(theta, kappa) . v``."""

    u: np.ndarray
    theta: float
    kappa: float
    v: np.ndarray

    def matrix(self) -> np.ndarray:
        """Multiply the factors back together."""
        return self.u @ d_matrix(self.theta, self.kappa) @ self.v


def rz(xi: complex) -> np.ndarray:
    """z rotation, complex angles allowed."""
    return np.array(
        [[np.exp(-0.5j * xi), 0], [0, np.exp(0.5j * xi)]], dtype=complex
    )


def rx(xi: complex) -> np.ndarray:
    """x rotation ``H Rz(xi) H``."""
    return H @ rz(xi) @ H


def cp(phi: float) -> np.ndarray:
    """Controlled phase ``diag(1, 1, 1, exp(i phi))``."""
    return np.diag([1, 1, 1, np.exp(1j * phi)]).astype(complex)


def d_matrix(theta: float, kappa: float = 1.0) -> np.ndarray:
    """Positive diagonal ``kappa diag(cos theta, sin theta)``."""
    return kappa * np.diag([np.cos(theta), np.sin(theta)]).astype(complex)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Return the matrix of a gate (2x2, or 4x4 for CZ and CP)."""
    kind = GateKind(gate.kind)
    if kind == GateKind.X:
        return X.copy()
    if kind == GateKind.Y:
        return Y.copy()
    if kind == GateKind.Z:
        return Z.copy()
    if kind == GateKind.H:
        return H.copy()
    if kind == GateKind.RZ:
        return rz(gate.angle)
    if kind == GateKind.RX:
        return rx(gate.angle)
    if kind == GateKind.CZ:
        return CZ.copy()
    return cp(float(np.real(gate.angle)))


def kron(*matrices: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices, left factor most significant."""
    return reduce(np.kron, matrices)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def is_invertible(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """True when ``|det m| > tol * ||m||_F^2`` and every entry is finite."""
    if not np.all(np.isfinite(m)):
        return False
    scale = np.linalg.norm(m) ** 2
    return bool(scale > 0 and abs(np.linalg.det(m)) > tol * scale)


def is_unitary(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.allclose(dagger(m) @ m, np.eye(m.shape[0]), atol=tol, rtol=0))


def svd2(m: np.ndarray, tol: float = DEFAULT_TOL) -> Svd2:
    """Decompose an invertible 2x2 matrix as ``u . kappa diag(cos, sin) . v``.

    Args:
        m: Invertible 2x2 complex matrix
        tol: Invertibility tolerance relative to the squared Frobenius norm

    Returns:
        Svd2 with theta in (0, pi/4] and kappa > 0

    Raises:
        SingularInput: If m is singular or has non-finite entries
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise SingularInput("Expected a 2x2 matrix", details={"shape": list(m.shape)})
    if not is_invertible(m, tol):
        raise SingularInput(
            "Matrix is not invertible",
            details={"det": abs(np.linalg.det(m)) if np.all(np.isfinite(m)) else None}
        )

    u, s, vh = np.linalg.svd(m)
    theta = float(np.arctan2(s[1], s[0]))
    kappa = float(np.hypot(s[0], s[1]))
    return Svd2(u=u, theta=theta, kappa=kappa, v=vh)


def operator_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between two operators after removing complex scale.

    Zero exactly when ``a`` is proportional to ``b``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return float(np.sqrt(2.0))
    a_n, b_n = a / na, b / nb
    overlap = np.vdot(b_n, a_n)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a_n - phase * b_n))


def proportional(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    return operator_distance(a, b) < tol
