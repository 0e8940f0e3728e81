"""Custom exception classes for lab operations."""


class LabError(Exception):
    """Base exception for all lab operations."""

    code = "lab_error"

    def __init__(self, message: str, details: dict = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class SingularInput(LabError):
    """Local operator is not invertible within tolerance."""

    code = "singular_input"


class NotNType(LabError):
    """Operator does not preserve the relative norm of basis states."""

    code = "not_n_type"


class NotBType(LabError):
    """Operator does not preserve orthogonality of basis states."""

    code = "not_b_type"


class InvalidBasis(LabError):
    """Measurement basis vectors are not orthogonal."""

    code = "invalid_basis"


class TooManyQubits(LabError):
    """Dense state exceeds the configured amplitude budget."""

    code = "too_many_qubits"


class SiteAlreadyMeasured(LabError):
    """Site was already projected."""

    code = "site_already_measured"


class ZeroProbabilityBranch(LabError):
    """Forced outcome has vanishing probability."""

    code = "zero_probability_branch"


class IllConditioned(LabError):
    """Transfer-matrix normalization vanished."""

    code = "ill_conditioned"


class InsufficientDecay(LabError):
    """Too few usable correlator points for a fit."""

    code = "insufficient_decay"


class ChainExhausted(LabError):
    """Resource chain ended before the protocol finished.

    The partial measurement record is kept on ``record``.
    """

    code = "chain_exhausted"

    def __init__(self, message: str, details: dict = None, record=None):
        super().__init__(message, details)
        self.record = record


class BudgetTooLarge(LabError):
    """Trajectory enumeration requested beyond its limit."""

    code = "budget_too_large"


class NoCrossing(LabError):
    """Target value is not reached on the parameter domain."""

    code = "no_crossing"


class ConfigError(LabError):
    """Configuration or experiment schema is invalid."""

    code = "config_error"
