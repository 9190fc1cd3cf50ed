#!/usr/bin/env python3

import os
import secrets

from utils.errors import ConfigError

# Constants
EXACT_TOLERANCE = 1e-9  # absolute tolerance for exact-path identities
FAIRNESS_TOLERANCE = 1e-13  # float slack when comparing a mass against phi
SEED_BITS = 63
PLAN_CSV_HEADER = ["step", "i", "j", "k", "gain", "fairness_after"]
RESULTS_CSV_HEADER = ["round", "algorithm", "metric", "value", "seed"]

__all__ = [
    "EXACT_TOLERANCE",
    "FAIRNESS_TOLERANCE",
    "PLAN_CSV_HEADER",
    "RESULTS_CSV_HEADER",
    "normalize_file_path",
    "validate_alpha",
    "resolve_seed",
]


def normalize_file_path(file_path: str) -> str:
    expanded_path = os.path.expanduser(file_path)
    if not os.path.isabs(expanded_path):
        return os.path.abspath(os.path.join(os.getcwd(), expanded_path))
    return os.path.abspath(expanded_path)


def validate_alpha(alpha: float) -> float:
    """Check that the restart probability lies in the open interval (0, 1).

    Args:
        alpha: Restart probability

    Returns:
        alpha as a float

    Raises:
        ConfigError: If alpha is outside (0, 1)
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def resolve_seed(seed: int | None) -> int:
    """Return seed unchanged, or draw a fresh one when it is None."""
    if seed is None:
        return secrets.randbits(SEED_BITS)
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return int(seed)
