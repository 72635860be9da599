"""Input validation helpers used by the estimator, config and CLI layers."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataError

RATIO_TOL = 1e-9


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_nonneg_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 0:
        raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_positive_float(value, name: str) -> float:
    value = _as_float(value, name)
    if not value > 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")
    return value


def check_nonneg_float(value, name: str) -> float:
    value = _as_float(value, name)
    if not value >= 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return value


def _as_float(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return value


def check_ratios(ratios) -> tuple[float, float, float]:
    """Validate a train/valid/test ratio triple: non-negative, sums to 1."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ConfigError(f"expected 3 split ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"split ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > RATIO_TOL:
        raise ConfigError(f"split ratios must sum to 1 (tolerance {RATIO_TOL}), got {ratios}")
    return ratios


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_finite_array(arr, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr
