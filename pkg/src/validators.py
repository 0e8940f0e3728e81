"""Input validation functions for lab parameters."""

import math
import re

EXPERIMENT_KINDS = [
    "corrlength",
    "walk",
    "percolation",
    "nun_rotate",
    "bub_rotate",
    "bundo",
    "entangle",
]


def validate_experiment_name(name: str) -> tuple[bool, str]:
    """Validate experiment name format.

    Args:
        name: Experiment name to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not name:
        return False, "Experiment name cannot be empty"

    if len(name) > 50:
        return False, "Experiment name too long (max 50 characters)"

    if not re.match(r'^[a-z0-9-]+$', name):
        return False, "Experiment name must contain only lowercase letters, numbers, and hyphens"

    return True, ""


def validate_experiment_kind(kind: str) -> tuple[bool, str]:
    """Validate experiment kind.

    Args:
        kind: Experiment kind to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    if kind not in EXPERIMENT_KINDS:
        return False, f"Invalid experiment kind. Allowed kinds: {', '.join(EXPERIMENT_KINDS)}"

    return True, ""


def validate_angle(value) -> tuple[bool, str]:
    """Validate a real angle in radians."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False, "Angle must be a real number"

    if not math.isfinite(value):
        return False, "Angle must be finite"

    return True, ""


def validate_theta(value) -> tuple[bool, str]:
    """Validate a singular-value angle, open interval (0, pi/2)."""
    valid, error = validate_angle(value)
    if not valid:
        return valid, error

    if not 0.0 < value < math.pi / 2:
        return False, "Theta must lie strictly between 0 and pi/2"

    return True, ""


def validate_lambda(value) -> tuple[bool, str]:
    """Validate a singular-value ratio, open interval (0, 1)."""
    valid, error = validate_angle(value)
    if not valid:
        return False, "Lambda must be a real number"

    if not 0.0 < value < 1.0:
        return False, "Lambda must lie strictly between 0 and 1"

    return True, ""


def validate_probability(value) -> tuple[bool, str]:
    """Validate a probability in [0, 1]."""
    valid, error = validate_angle(value)
    if not valid:
        return False, "Probability must be a real number"

    if not 0.0 <= value <= 1.0:
        return False, "Probability must lie in [0, 1]"

    return True, ""


def validate_lattice_side(value) -> tuple[bool, str]:
    """Validate a lattice side length."""
    if isinstance(value, bool) or not isinstance(value, int):
        return False, "Lattice side must be an integer"

    if value < 2:
        return False, "Lattice side must be at least 2"

    return True, ""


def validate_budget(value) -> tuple[bool, str]:
    """Validate a positive integer budget (sites, steps, trials)."""
    if isinstance(value, bool) or not isinstance(value, int):
        return False, "Budget must be an integer"

    if value < 1:
        return False, "Budget must be positive"

    # Warning for very large budgets (not an error)
    if value > 10**7:
        return True, f"Warning: budget is very large ({value})"

    return True, ""
