"""Classical and kernel tests of normality.

Every test standardizes internally, so statistics do not depend on the
location and scale of the sample.  p-values come from Royston's normalizing
transformation (Shapiro-Wilk), Stephens' formula on the modified statistic
(Anderson-Darling), the chi-squared(2) law (Jarque-Bera), a cached Monte Carlo
null table (Lilliefors) and a parametric bootstrap (FSSD).
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special

from .errors import (ConstantSample, NumericalOverflow, SampleTooLarge, SampleTooSmall,
                     ZeroBandwidth)
from .features import kurtosis, skewness
from .rng import NULL, RandomStream, substream
from .sample import as_sample, standardize

METHODS = ("SW", "LF", "AD", "CVM", "JB", "AJB", "FSSD")


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p_value: float
    alpha: float
    reject: bool
    method: str

    __test__ = False  # keep pytest from collecting this class

    @classmethod
    def build(cls, method: str, statistic: float, p_value: float, alpha: float) -> "TestOutcome":
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        p = min(max(float(p_value), 0.0), 1.0)
        return cls(float(statistic), p, float(alpha), p < alpha, method)

    def to_json(self) -> dict:
        return asdict(self)


def normal_cdf(t):
    """Standard normal CDF.

    Evaluated through Cephes' ``ndtr``, which switches between the erf series
    near zero and the erfc continued-fraction expansion in the tails, so the
    result keeps full double precision (absolute error below 1e-16).
    """
    return special.ndtr(t)


# -- Shapiro-Wilk ----------------------------------------------------------------

def _poly(coef, x):
    return np.polynomial.polynomial.polyval(x, coef)


_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


@lru_cache(maxsize=None)
def _sw_coefficients(n: int) -> np.ndarray:
    """Royston's approximation to the normalized BLUE weights, ascending order."""
    half = n // 2
    if n == 3:
        a = np.array([math.sqrt(0.5)])
    else:
        m = -special.ndtri((np.arange(1, half + 1) - 0.375) / (n + 0.25))
        summ2 = 2 * np.dot(m, m)
        ssumm2 = math.sqrt(summ2)
        rsn = 1 / math.sqrt(n)
        a = m / ssumm2
        a1 = _poly(_C1, rsn) + m[0] / ssumm2
        if n > 5:
            a2 = _poly(_C2, rsn) + m[1] / ssumm2
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2)
                            / (1 - 2 * a1**2 - 2 * a2**2))
            a = m / fac
            a[0], a[1] = a1, a2
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
            a = m / fac
            a[0] = a1
    full = np.zeros(n)
    full[:half] = -a
    full[n - half:] = a[::-1]
    return full


def _sw_pvalue(w: float, n: int) -> float:
    w1 = 1 - w
    if n == 3:
        return max(6 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3), 0.0)
    y = math.log(w1) if w1 > 0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return 1e-99
        y = -math.log(gamma - y)
        m = _poly(_C3, n)
        s = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        m = _poly(_C5, ln)
        s = math.exp(_poly(_C6, ln))
    return float(special.ndtr(-(y - m) / s))


def shapiro_wilk(x, alpha: float = 0.05) -> TestOutcome:
    """Shapiro-Wilk W with Royston's (AS R94) coefficients and p-value, 3 <= n <= 5000."""
    arr = as_sample(x)
    n = arr.size
    if n > 5000:
        raise SampleTooLarge(f"Shapiro-Wilk supports n <= 5000, got {n}")
    xs = np.sort(arr)
    rng_ = xs[-1] - xs[0]
    if rng_ < 1e-19 or rng_ <= 1e-14 * abs(xs[0]):
        raise ConstantSample("sample has zero range")
    a = _sw_coefficients(n)
    xc = xs / rng_
    xc = xc - xc.mean()
    ac = a - a.mean()
    ssa = np.dot(ac, ac)
    ssx = np.dot(xc, xc)
    sax = np.dot(ac, xc)
    root = math.sqrt(ssa * ssx)
    # 1 - W in a form that avoids cancellation when W is near 1
    w1 = (root - sax) * (root + sax) / (ssa * ssx)
    w = 1 - w1
    return TestOutcome.build("SW", w, _sw_pvalue(w, n), alpha)


# -- EDF tests ---------------------------------------------------------------------

def _ks_distance(z_sorted: np.ndarray, literal: bool = False) -> np.ndarray:
    """Lilliefors D for rows of sorted standardized samples."""
    n = z_sorted.shape[-1]
    cdf = special.ndtr(z_sorted)
    i = np.arange(1, n + 1)
    upper = i / n - cdf
    if literal:
        return np.max(np.abs(upper), axis=-1)
    lower = cdf - (i - 1) / n
    return np.maximum(upper.max(axis=-1), lower.max(axis=-1))


def _literal_edf_distance(z: np.ndarray) -> float:
    zs = np.sort(z)
    edf = np.searchsorted(zs, zs, side="right") / zs.size
    return float(np.max(np.abs(edf - special.ndtr(zs))))


def cache_dir() -> Path:
    """Directory for cached null tables (``NORMNET_CACHE_DIR`` overrides)."""
    root = os.environ.get("NORMNET_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "normnet"
    return path


def _simulate_ks_null(n: int, sims: int, seed: int, literal: bool) -> np.ndarray:
    rng = substream(seed, NULL, n, int(literal))
    out = np.empty(sims)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, sims, chunk):
        stop = min(sims, start + chunk)
        x = rng.standard_normal((stop - start, n))
        x.sort(axis=1)
        x -= x.mean(axis=1, keepdims=True)
        x /= x.std(axis=1, ddof=1, keepdims=True)
        out[start:stop] = _ks_distance(x, literal)
    return np.sort(out)


@lru_cache(maxsize=256)
def lilliefors_null(n: int, sims: int = 10_000, seed: int = 20200101,
                    literal: bool = False) -> np.ndarray:
    """Sorted null draws of D for samples of size ``n``, cached on disk."""
    name = f"lf_n{n}_s{sims}_seed{seed}{'_lit' if literal else ''}.npy"
    path = cache_dir() / name
    if path.exists():
        try:
            table = np.load(path)
            if table.shape == (sims,):
                return table
        except (OSError, ValueError):
            pass
    table = _simulate_ks_null(n, sims, seed, literal)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.tmp.npy")
        np.save(tmp, table)
        os.replace(tmp, path)
    except OSError:
        pass
    return table


def mc_pvalue(observed: float, sorted_null: np.ndarray) -> float:
    """(1 + #{null >= observed}) / (1 + N) against a sorted null sample."""
    exceed = sorted_null.size - np.searchsorted(sorted_null, observed, side="left")
    return (1 + exceed) / (1 + sorted_null.size)


def lilliefors_statistic(x, literal: bool = False) -> float:
    """Largest EDF-to-normal distance of the standardized sample (n >= 3)."""
    z = standardize(x)
    return _literal_edf_distance(z) if literal else float(_ks_distance(np.sort(z)))


def lilliefors(x, alpha: float = 0.05, sims: int = 10_000, seed: int = 20200101,
               literal: bool = False) -> TestOutcome:
    """Kolmogorov-Smirnov distance to N(mean, sd^2) with a Monte Carlo p-value.

    ``literal=True`` compares the EDF with the normal CDF at the sample points
    only, ignoring the left limits (i - 1)/n.
    """
    arr = as_sample(x, 4)
    d = lilliefors_statistic(arr, literal)
    null = lilliefors_null(arr.size, sims, seed, literal)
    return TestOutcome.build("LF", d, mc_pvalue(d, null), alpha)


def _sorted_standardized(x, min_size: int = 3) -> tuple[np.ndarray, int]:
    arr = as_sample(x, min_size)
    return np.sort(standardize(arr, min_size)), arr.size


def anderson_darling_statistic(x) -> float:
    z, n = _sorted_standardized(x)
    cdf = special.ndtr(z)
    if np.any((cdf < 1e-15) | (cdf > 1 - 1e-15)):
        warnings.warn("normal CDF within 1e-15 of 0 or 1; logs evaluated in the log domain",
                      NumericalOverflow, stacklevel=3)
    log_cdf = special.log_ndtr(z)
    log_sf = special.log_ndtr(-z)
    i = np.arange(1, n + 1)
    return float(-n - np.dot(2 * i - 1, log_cdf + log_sf[::-1]) / n)


def _stephens_pvalue(a_mod: float) -> float:
    if a_mod < 0.2:
        p = 1 - math.exp(-13.436 + 101.14 * a_mod - 223.73 * a_mod**2)
    elif a_mod < 0.34:
        p = 1 - math.exp(-8.318 + 42.796 * a_mod - 59.938 * a_mod**2)
    elif a_mod < 0.6:
        p = math.exp(0.9177 - 4.279 * a_mod - 1.38 * a_mod**2)
    elif a_mod < 10:
        p = math.exp(1.2937 - 5.709 * a_mod + 0.0186 * a_mod**2)
    else:
        p = 3.7e-24
    return min(max(p, 0.0), 1.0)


def anderson_darling(x, alpha: float = 0.05) -> TestOutcome:
    """AD test; the p-value uses the small-sample modified statistic."""
    as_sample(x, 4)
    a = anderson_darling_statistic(x)
    n = np.size(x)
    modified = a * (1 + 0.75 / n + 2.25 / n**2)
    return TestOutcome.build("AD", a, _stephens_pvalue(modified), alpha)


def cramer_von_mises(x) -> float:
    """Cramer-von Mises distance of the standardized sample to N(0, 1)."""
    z, n = _sorted_standardized(x)
    i = np.arange(1, n + 1)
    return float(np.sum((special.ndtr(z) - (2 * i - 1) / (2 * n)) ** 2) + 1 / (12 * n))


# -- moment tests ---------------------------------------------------------------------

def jarque_bera(x, adjusted: bool = False, alpha: float = 0.05) -> TestOutcome:
    """Jarque-Bera test; ``adjusted`` uses Urzua's exact small-sample moments."""
    arr = as_sample(x, 4 if adjusted else 3)
    n = arr.size
    s, k = skewness(arr), kurtosis(arr)
    if adjusted:
        c1 = 6 * (n - 2) / ((n + 1) * (n + 3))
        c2 = 3 * (n - 1) / (n + 1)
        c3 = 24 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
        j = s * s / c1 + (k - c2) ** 2 / c3
    else:
        j = n * (s * s / 6 + (k - 3) ** 2 / 24)
    return TestOutcome.build("AJB" if adjusted else "JB", j, math.exp(-j / 2), alpha)


# -- finite set Stein discrepancy ---------------------------------------------------------

@dataclass(frozen=True)
class FssdConfig:
    m: int = 10
    bandwidth: float | None = None  # None selects the median heuristic
    null_sims: int = 200

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.null_sims < 100:
            raise ValueError("null_sims must be at least 100")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


def median_pairwise_distance(x: np.ndarray) -> np.ndarray:
    """Median of |x_i - x_j| over i < j, row-wise for 2-D input."""
    x = np.atleast_2d(x)
    n = x.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    out = np.empty(x.shape[0])
    chunk = max(1, 4_000_000 // max(1, iu.size))
    for start in range(0, x.shape[0], chunk):
        rows = x[start:start + chunk]
        out[start:start + chunk] = np.median(np.abs(rows[:, iu] - rows[:, ju]), axis=1)
    return out


def _fssd_rows(x: np.ndarray, eps_loc: np.ndarray, bandwidth: float | None) -> np.ndarray:
    """FSSD^2 U-statistic per row of ``x``; locations are mean + sd * eps_loc."""
    n = x.shape[1]
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, ddof=1, keepdims=True)
    v = mean + np.sqrt(var) * eps_loc
    if bandwidth is None:
        sigma = median_pairwise_distance(x)[:, None]
    else:
        sigma = np.full((x.shape[0], 1), float(bandwidth))
    if np.any(sigma <= 0):
        raise ZeroBandwidth("median pairwise difference is zero")
    score = (mean - x) / var
    diff = x[:, :, None] - v[:, None, :]
    s2 = (sigma * sigma)[:, :, None]
    k = np.exp(-diff * diff / (2 * s2))
    xi = (score[:, :, None] - diff / s2) * k
    total = xi.sum(axis=1)
    pair_sum = np.sum(total * total, axis=1) - np.sum(xi * xi, axis=(1, 2))
    return pair_sum / (eps_loc.shape[1] * n * (n - 1))


def _check_fssd_input(x) -> np.ndarray:
    arr = as_sample(x, 2)
    if np.std(arr) == 0:
        raise ConstantSample("sample has zero variance")
    return arr


def fssd_statistic(x, cfg: FssdConfig | None = None, rng: RandomStream | None = None) -> float:
    cfg = cfg or FssdConfig()
    arr = _check_fssd_input(x)
    rng = rng if rng is not None else substream(0)
    eps = rng.standard_normal((1, cfg.m))
    return float(_fssd_rows(arr[None, :], eps, cfg.bandwidth)[0])


def fssd_null(n: int, cfg: FssdConfig, rng: RandomStream) -> np.ndarray:
    """Bootstrap draws of sd^2 * FSSD^2 under a fitted normal model.

    The scaled statistic is pivotal for a normal law whose mean and variance are
    estimated, so one table serves every sample of size ``n`` when the
    bandwidth follows the median heuristic.
    """
    sims = cfg.null_sims
    out = np.empty(sims)
    chunk = max(1, 2_000_000 // (n * max(n, cfg.m)))
    for start in range(0, sims, chunk):
        stop = min(sims, start + chunk)
        xs = rng.standard_normal((stop - start, n))
        eps = rng.standard_normal((stop - start, cfg.m))
        stat = _fssd_rows(xs, eps, cfg.bandwidth)
        out[start:stop] = stat * xs.var(axis=1, ddof=1)
    return np.sort(out)


def fssd_test(x, cfg: FssdConfig | None = None, alpha: float = 0.05,
              rng: RandomStream | None = None, null: np.ndarray | None = None) -> TestOutcome:
    """FSSD normality test with a parametric-bootstrap p-value.

    The observed statistic and ``cfg.null_sims`` bootstrap samples drawn from
    N(mean, sd^2) are processed identically (model refitted, locations
    redrawn, bandwidth recomputed).  A precomputed ``null`` from
    :func:`fssd_null` may be supplied instead when the bandwidth is not fixed.
    """
    cfg = cfg or FssdConfig()
    arr = _check_fssd_input(x)
    rng = rng if rng is not None else substream(0)
    stat = fssd_statistic(arr, cfg, rng)
    var = arr.var(ddof=1)
    if null is None:
        if cfg.bandwidth is None:
            null = fssd_null(arr.size, cfg, rng)
            observed = stat * var
        else:
            # a fixed bandwidth breaks pivotality, so bootstrap on the data scale
            mean, sd = arr.mean(), math.sqrt(var)
            sims = mean + sd * rng.standard_normal((cfg.null_sims, arr.size))
            eps = rng.standard_normal((cfg.null_sims, cfg.m))
            null = np.sort(_fssd_rows(sims, eps, cfg.bandwidth))
            observed = stat
    else:
        observed = stat * var
    return TestOutcome.build("FSSD", stat, mc_pvalue(observed, null), alpha)


# -- dispatch -------------------------------------------------------------------------

def run_test(method: str, x, alpha: float = 0.05, rng: RandomStream | None = None,
             fssd: FssdConfig | None = None) -> TestOutcome:
    """Run a test by its short name (SW, LF, AD, JB, AJB, FSSD)."""
    method = method.upper()
    if method == "SW":
        return shapiro_wilk(x, alpha)
    if method == "LF":
        return lilliefors(x, alpha)
    if method == "AD":
        return anderson_darling(x, alpha)
    if method == "JB":
        return jarque_bera(x, False, alpha)
    if method == "AJB":
        return jarque_bera(x, True, alpha)
    if method == "FSSD":
        return fssd_test(x, fssd, alpha, rng)
    raise ValueError(f"unknown test {method!r}; choose from SW, LF, AD, JB, AJB, FSSD")


__all__ = [
    "TestOutcome", "FssdConfig", "METHODS", "normal_cdf", "shapiro_wilk", "lilliefors",
    "lilliefors_null", "lilliefors_statistic", "mc_pvalue", "anderson_darling", "anderson_darling_statistic",
    "cramer_von_mises", "jarque_bera", "fssd_statistic", "fssd_null", "fssd_test", "run_test",
    "SampleTooSmall", "cache_dir", "median_pairwise_distance",
]
