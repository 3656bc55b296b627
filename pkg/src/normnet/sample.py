"""Validation and standardization of one-dimensional samples."""
from __future__ import annotations

import numpy as np

from .errors import ConstantSample, SampleTooSmall


def as_sample(x, min_size: int = 3) -> np.ndarray:
    """Return ``x`` as a finite float64 vector with at least ``min_size`` entries."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size < min_size:
        raise SampleTooSmall(f"sample has {arr.size} elements, need at least {min_size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite values")
    return arr


def sample_sd(x: np.ndarray) -> float:
    """Standard deviation with the n-1 denominator."""
    return float(np.std(x, ddof=1))


def _spread(arr: np.ndarray) -> tuple[float, float, np.ndarray]:
    mean = arr.mean()
    centered = arr - mean
    return mean, float(np.sqrt(np.dot(centered, centered) / (arr.size - 1))), centered


def _degenerate(mean: float, sd: float) -> bool:
    # spreads at rounding level of the mean carry no shape information
    return sd == 0.0 or sd <= 1e-14 * max(1.0, abs(mean))


def is_degenerate(x) -> bool:
    """True when ``x`` is constant up to floating-point rounding."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size < 2:
        return True
    mean, sd, _ = _spread(arr)
    return _degenerate(mean, sd)


def standardize(x, min_size: int = 3) -> np.ndarray:
    """Map ``x`` to ``(x - mean) / sd`` using the unbiased variance.

    Raises ConstantSample when the sample has zero spread.
    """
    arr = as_sample(x, min_size)
    mean, sd, centered = _spread(arr)
    if _degenerate(mean, sd):
        raise ConstantSample("sample has zero standard deviation")
    return centered / sd
