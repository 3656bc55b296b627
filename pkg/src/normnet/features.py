"""Fixed-size representations of variable-size samples.

Two encodings feed the classifiers: the quantile descriptor (standardized
sample quantiles plus n, mean, sd, min, max, median) and the statistic vector
[skewness, kurtosis, W, Z_p, K_3n, K_5n, n].
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .errors import (ConstantSample, DegenerateCorrelation, InvalidProbability,
                     InvalidWindow, SampleTooSmall, ZeroSpacing)
from .sample import as_sample, sample_sd, standardize

__all__ = [
    "Descriptor", "StatVector", "standardize", "empirical_quantile", "quantile_levels",
    "descriptor", "descriptor_columns", "skewness", "kurtosis", "lin_mudholkar",
    "vasicek", "sbnn_features", "SBNN_COLUMNS",
]

_TOL = 1e-9


@dataclass(frozen=True)
class Descriptor:
    quantiles: tuple[float, ...]
    n: int
    mean: float
    sd: float
    min: float
    max: float
    median: float

    def to_array(self) -> np.ndarray:
        return np.array([*self.quantiles, self.n, self.mean, self.sd,
                         self.min, self.max, self.median], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.quantiles) + 6


@dataclass(frozen=True)
class StatVector:
    skew: float
    kurt: float
    w: float
    zp: float
    k3: float
    k5: float
    n: int

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


SBNN_COLUMNS = ("skew", "kurt", "w", "zp", "k3", "k5", "n")


def quantile_levels(q: float) -> np.ndarray:
    """Probabilities q, 2q, ..., ending exactly at 1 (ceil(1/q) levels)."""
    if not 0 < q <= 1:
        raise InvalidProbability(f"q must lie in (0, 1], got {q}")
    count = math.ceil(1 / q - _TOL)
    levels = np.arange(1, count + 1) * q
    levels[-1] = 1.0
    return levels


def descriptor_columns(q: float) -> list[str]:
    """CSV header matching ``Descriptor.to_array`` for quantile step ``q``."""
    names = [f"h_{p:.6g}" for p in quantile_levels(q)]
    return names + ["n", "mean", "sd", "min", "max", "median"]


def empirical_quantile(z, p: float) -> float:
    """Smallest element ``z_i`` whose EDF value reaches ``p``."""
    if not 0 < p <= 1:
        raise InvalidProbability(f"p must lie in (0, 1], got {p}")
    zs = np.sort(np.asarray(z, dtype=np.float64).ravel())
    if zs.size == 0:
        raise SampleTooSmall("empty sample")
    return float(zs[_rank(p, zs.size)])


def _rank(p, n: int):
    # 0-based index of the first order statistic with EDF >= p; the slack keeps
    # p = k/n computed in floating point from skipping past z_(k)
    k = np.ceil(np.asarray(p) * n - _TOL * n).astype(np.int64)
    return np.clip(k, 1, n) - 1


def descriptor(x, q: float = 0.1) -> Descriptor:
    arr = as_sample(x)
    n = arr.size
    levels = quantile_levels(q)
    if len(levels) > 10 * n:
        raise InvalidProbability(f"q={q} gives {len(levels)} quantiles for a sample of {n}")
    z = np.sort(standardize(arr))
    quantiles = z[_rank(levels, n)]
    return Descriptor(
        quantiles=tuple(float(v) for v in quantiles),
        n=n,
        mean=float(arr.mean()),
        sd=sample_sd(arr),
        min=float(arr.min()),
        max=float(arr.max()),
        median=float(np.median(arr)),
    )


def _central_moments(x) -> tuple[float, float, float]:
    arr = as_sample(x)
    d = arr - arr.mean()
    d2 = d * d
    m2 = d2.mean()
    if m2 <= 0 or m2 <= 1e-28 * arr.mean() ** 2:
        raise ConstantSample("sample has zero variance")
    return m2, (d2 * d).mean(), (d2 * d2).mean()


def skewness(x) -> float:
    """m3 / m2^(3/2) with biased central moments."""
    m2, m3, _ = _central_moments(x)
    return m3 / m2**1.5


def kurtosis(x) -> float:
    """m4 / m2^2 with biased central moments (3 for a normal law)."""
    m2, _, m4 = _central_moments(x)
    return m4 / (m2 * m2)


def lin_mudholkar(x) -> float:
    """Fisher-transformed correlation between x_i and the cube root of the
    leave-one-out variance of the remaining observations."""
    arr = as_sample(x, 4)
    n = arr.size
    d = arr - arr.mean()
    if not np.any(d):
        raise ConstantSample("sample has zero variance")
    s1 = d.sum() - d
    s2 = np.dot(d, d) - d * d
    h = np.cbrt((s2 - s1 * s1 / (n - 1)) / n)
    hc = h - h.mean()
    sxx = np.dot(d, d)
    shh = np.dot(hc, hc)
    if sxx == 0 or shh == 0:
        raise DegenerateCorrelation("zero variance in correlation denominator")
    r = np.dot(d, hc) / math.sqrt(sxx * shh)
    r = min(max(r, -1.0), 1.0)
    if abs(r) == 1.0:
        return math.copysign(math.inf, r)
    return 0.5 * math.log((1 + r) / (1 - r))


def vasicek(x, m: int) -> float:
    """Vasicek's spacing entropy estimate divided by sd."""
    arr = as_sample(x)
    n = arr.size
    if not 1 <= m < n / 2:
        raise InvalidWindow(f"window m={m} must satisfy 1 <= m < n/2 = {n / 2}")
    sd = sample_sd(arr)
    if sd == 0:
        raise ConstantSample("sample has zero variance")
    xs = np.sort(arr)
    idx = np.arange(n)
    spacings = xs[np.minimum(idx + m, n - 1)] - xs[np.maximum(idx - m, 0)]
    if np.any(spacings <= 0):
        raise ZeroSpacing(f"ties make a window of width {2 * m} collapse")
    return n / (2 * m * sd) * math.exp(np.log(spacings).mean())


def sbnn_features(x) -> StatVector:
    from .normality import shapiro_wilk

    arr = as_sample(x, 11)
    return StatVector(
        skew=skewness(arr),
        kurt=kurtosis(arr),
        w=shapiro_wilk(arr).statistic,
        zp=lin_mudholkar(arr),
        k3=vasicek(arr, 3),
        k5=vasicek(arr, 5),
        n=arr.size,
    )
