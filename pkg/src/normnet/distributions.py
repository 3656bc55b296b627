"""Sampleable one-dimensional laws used to synthesize training and test data.

Named families are thin wrappers over numpy's generators.  The Pearson system
is parameterized by its first four moments; the density solves

    f'(x) / f(x) = (x - a) / (b0 + b1 x + b2 x^2)

in centered coordinates.  The type is read off the roots of the quadratic and
each type is sampled exactly where it maps onto a textbook family (beta, gamma,
beta-prime, inverse gamma, Student t).  Type IV has no such family and is
sampled by numerical inversion of its CDF.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DegenerateDenominator, InfeasibleMoments
from .rng import RandomStream

_EPS = 1e-12


class PearsonType(str, enum.Enum):
    NORMAL = "0"
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"
    VII = "VII"


@dataclass(frozen=True)
class PearsonSpec:
    mean: float
    sd: float
    skew: float
    kurt: float
    a: float
    b0: float
    b1: float
    b2: float
    pearson_type: PearsonType


def pearson_feasible(skew: float, kurt: float) -> bool:
    """True iff some distribution has skewness ``skew`` and kurtosis ``kurt``."""
    return kurt > skew * skew + 1


def _coefficients(m2: float, m3: float, m4: float) -> tuple[float, float, float, float]:
    c = 10 * m4 * m2 - 12 * m3**2 - 18 * m2**3
    if c == 0.0 or abs(c) <= _EPS * max(abs(10 * m4 * m2), 18 * m2**3):
        raise DegenerateDenominator("10*m4*m2 - 12*m3^2 - 18*m2^3 vanishes")
    a = -m3 * (m4 + 3 * m2**2) / c
    b0 = -m2 * (4 * m2 * m4 - 3 * m3**2) / c
    b2 = -(2 * m2 * m4 - 3 * m3**2 - 6 * m2**3) / c
    return a, b0, a, b2


def _classify(b0: float, b1: float, b2: float) -> PearsonType:
    # operates on standardized coefficients (unit variance)
    if abs(b2) < _EPS:
        return PearsonType.NORMAL if abs(b1) < _EPS else PearsonType.III
    disc = b1 * b1 - 4 * b0 * b2
    if abs(b1) < _EPS:
        return PearsonType.II if disc > 0 else PearsonType.VII
    if abs(disc) < _EPS:
        return PearsonType.V
    if disc < 0:
        return PearsonType.IV
    r1, r2 = sorted(np.roots([b2, b1, b0]).real)
    return PearsonType.I if r1 < 0 < r2 else PearsonType.VI


def pearson_from_moments(mean: float, sd: float, skew: float, kurt: float) -> PearsonSpec:
    """Pearson coefficients and type for the given mean, sd, skewness and kurtosis."""
    if not sd > 0:
        raise InfeasibleMoments(f"sd must be positive, got {sd}")
    if not pearson_feasible(skew, kurt):
        raise InfeasibleMoments(f"no distribution has skew={skew}, kurt={kurt}")
    m2 = sd * sd
    a, b0, b1, b2 = _coefficients(m2, skew * sd**3, kurt * sd**4)
    _, sb0, sb1, sb2 = _coefficients(1.0, skew, kurt)
    return PearsonSpec(float(mean), float(sd), float(skew), float(kurt),
                       a, b0, b1, b2, _classify(sb0, sb1, sb2))


# -- standardized samplers ------------------------------------------------------

Sampler = Callable[[RandomStream, int], np.ndarray]


class _AngularInverter:
    """Inverse-CDF sampler for the Pearson type IV law.

    Under x = c + sqrt(D) tan(t) the density becomes cos(t)^p exp(k t) on
    (-pi/2, pi/2), which is smooth and compactly supported.  The CDF is
    tabulated with Gauss-Legendre quadrature on a grid spanning the region
    where the log density is within ``span`` of its maximum, then inverted per
    draw with safeguarded Newton steps.
    """

    n_cells = 1024
    span = 45.0
    _nodes, _weights = np.polynomial.legendre.leggauss(10)

    def __init__(self, p: float, k: float, c: float, scale: float):
        self.p, self.k, self.c, self.scale = p, k, c, scale
        mode = math.atan(k / p)
        self.log_peak = self._logpdf(mode)
        lo = self._edge(mode, -math.pi / 2)
        hi = self._edge(mode, math.pi / 2)
        self.grid = np.linspace(lo, hi, self.n_cells + 1)
        cell = self._integrate(self.grid[:-1], self.grid[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(cell)])
        self.total = self.cum[-1]

    def _logpdf(self, t):
        return self.p * np.log(np.cos(t)) + self.k * t

    def _pdf(self, t):
        return np.exp(self._logpdf(t) - self.log_peak)

    def _edge(self, mode: float, bound: float) -> float:
        inside, outside = mode, bound
        for _ in range(200):
            mid = 0.5 * (inside + outside)
            if mid in (inside, outside):
                break
            with np.errstate(divide="ignore"):
                drop = self.log_peak - self._logpdf(mid)
            if drop > self.span:
                outside = mid
            else:
                inside = mid
        return outside

    def _integrate(self, lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        t = mid[..., None] + half[..., None] * self._nodes
        return half * (self._pdf(t) @ self._weights)

    def __call__(self, rng: RandomStream, n: int) -> np.ndarray:
        target = rng.random(n) * self.total
        j = np.clip(np.searchsorted(self.cum, target, side="right") - 1, 0, self.n_cells - 1)
        left, right = self.grid[j].copy(), self.grid[j + 1].copy()
        base = self.cum[j]
        t = 0.5 * (left + right)
        for _ in range(60):
            resid = base + self._integrate(self.grid[j], t) - target
            left = np.where(resid < 0, t, left)
            right = np.where(resid > 0, t, right)
            step = resid / np.maximum(self._pdf(t), 1e-300)
            t_new = t - step
            outside = (t_new <= left) | (t_new >= right)
            t_new = np.where(outside, 0.5 * (left + right), t_new)
            done = np.abs(t_new - t) <= 1e-13 * max(1.0, abs(self.grid[-1]))
            t = t_new
            if np.all(done):
                break
        return self.c + self.scale * np.tan(t)


@lru_cache(maxsize=4096)
def _standard_sampler(skew: float, kurt: float) -> Sampler:
    """Sampler of the zero-mean, unit-variance Pearson law with the given shape."""
    if skew < 0:
        mirrored = _standard_sampler(-skew, kurt)
        return lambda rng, n: -mirrored(rng, n)

    a, b0, b1, b2 = _coefficients(1.0, skew, kurt)
    kind = _classify(b0, b1, b2)

    if kind is PearsonType.NORMAL:
        return lambda rng, n: rng.standard_normal(n)

    if kind is PearsonType.III:
        # b1 < 0 for right skew: gamma on (r, inf)
        r = -b0 / b1
        shape = (r - a) / b1 + 1
        theta = -b1
        _check(shape > 0 and theta > 0, skew, kurt)
        return lambda rng, n: r + rng.gamma(shape, theta, n)

    if kind is PearsonType.VII:
        nu = -1.0 / b2 - 1
        scale = math.sqrt(b0 / b2 / nu)
        _check(nu > 4, skew, kurt)
        return lambda rng, n: scale * rng.standard_t(nu, n)

    if kind is PearsonType.IV:
        c = -b1 / (2 * b2)
        d = b0 / b2 - c * c
        _check(b2 < 0 and d > 0, skew, kurt)
        root_d = math.sqrt(d)
        return _AngularInverter(-1.0 / b2 - 2, (c - a) / (b2 * root_d), c, root_d)

    if kind is PearsonType.V:
        r = -b1 / (2 * b2)
        alpha = -1.0 / b2 - 1
        beta = (r - a) / b2
        _check(r < 0 and alpha > 0 and beta > 0, skew, kurt)
        return lambda rng, n: r + beta / rng.gamma(alpha, 1.0, n)

    r1, r2 = sorted(float(v) for v in np.roots([b2, b1, b0]).real)
    e1 = (r1 - a) / (b2 * (r1 - r2))
    e2 = (r2 - a) / (b2 * (r2 - r1))
    # density is proportional to |x - r1|^e1 |x - r2|^e2
    if kind in (PearsonType.I, PearsonType.II):
        _check(e1 > -1 and e2 > -1, skew, kurt)
        width = r2 - r1
        return lambda rng, n: r1 + width * rng.beta(e1 + 1, e2 + 1, n)

    # type VI, right skew: both roots negative, support (r2, inf)
    alpha = e2 + 1
    beta = -e1 - e2 - 1
    _check(r2 < 0 and alpha > 0 and beta > 0, skew, kurt)
    width = r2 - r1
    return lambda rng, n: r2 + width * rng.gamma(alpha, 1.0, n) / rng.gamma(beta, 1.0, n)


def _check(ok: bool, skew: float, kurt: float) -> None:
    if not ok:
        raise InfeasibleMoments(f"moments skew={skew}, kurt={kurt} do not define a proper law")


# -- named families ---------------------------------------------------------------

# family -> (parameter names, support)
FAMILIES: dict[str, tuple[tuple[str, ...], tuple[float, float]]] = {
    "normal": (("mu", "sigma"), (-math.inf, math.inf)),
    "t": (("df",), (-math.inf, math.inf)),
    "logistic": (("loc", "scale"), (-math.inf, math.inf)),
    "laplace": (("loc", "scale"), (-math.inf, math.inf)),
    "gumbel": (("loc", "scale"), (-math.inf, math.inf)),
    "exponential": (("mean",), (0.0, math.inf)),
    "gamma": (("shape", "scale"), (0.0, math.inf)),
    "lognormal": (("mu", "sigma"), (0.0, math.inf)),
    "weibull": (("scale", "shape"), (0.0, math.inf)),
    "uniform": (("a", "b"), (math.nan, math.nan)),
    "beta": (("alpha", "beta"), (0.0, 1.0)),
    "pearson": (("mean", "sd", "skew", "kurt"), (math.nan, math.nan)),
}

_POSITIVE = {
    "normal": (1,), "t": (0,), "logistic": (1,), "laplace": (1,), "gumbel": (1,),
    "exponential": (0,), "gamma": (0, 1), "lognormal": (1,), "weibull": (0, 1),
    "beta": (0, 1), "pearson": (1,),
}


@dataclass(frozen=True)
class DistributionSpec:
    """A named family with its parameters, in the order listed in ``FAMILIES``."""

    family: str
    params: tuple[float, ...]
    pearson: PearsonSpec | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        names, _ = FAMILIES[self.family]
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != len(names):
            raise ValueError(f"{self.family} takes {len(names)} parameters, got {len(params)}")
        for i in _POSITIVE.get(self.family, ()):
            if not params[i] > 0:
                raise ValueError(f"{self.family} parameter {names[i]} must be positive")
        if self.family == "uniform" and not params[1] > params[0]:
            raise ValueError("uniform requires b > a")
        if self.family == "pearson" and self.pearson is None:
            object.__setattr__(self, "pearson", pearson_from_moments(*params))

    @property
    def is_normal(self) -> bool:
        return self.family == "normal"

    @property
    def support(self) -> tuple[float, float]:
        if self.family == "uniform":
            return self.params
        if self.family == "pearson":
            return (-math.inf, math.inf)
        return FAMILIES[self.family][1]

    def sample(self, n: int, rng: RandomStream) -> np.ndarray:
        return sample(self, n, rng)

    def to_json(self) -> dict:
        out = {"family": self.family, "params": list(self.params)}
        if self.pearson is not None:
            p = self.pearson
            out["moments"] = {"mean": p.mean, "sd": p.sd, "skew": p.skew, "kurt": p.kurt}
            out["pearson_type"] = p.pearson_type.value
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DistributionSpec":
        return cls(obj["family"], tuple(obj["params"]))

    def __str__(self) -> str:
        args = ", ".join(f"{p:g}" for p in self.params)
        return f"{self.family}({args})"


def normal(mu: float = 0.0, sigma: float = 1.0) -> DistributionSpec:
    return DistributionSpec("normal", (mu, sigma))


def pearson(mean: float, sd: float, skew: float, kurt: float) -> DistributionSpec:
    return DistributionSpec("pearson", (mean, sd, skew, kurt))


def sample(spec: DistributionSpec, n: int, rng: RandomStream) -> np.ndarray:
    """``n`` independent draws from ``spec``; bit-reproducible for a given stream state."""
    if n < 1:
        raise ValueError("n must be at least 1")
    f, p = spec.family, spec.params
    if f == "normal":
        return rng.normal(p[0], p[1], n)
    if f == "t":
        return rng.standard_t(p[0], n)
    if f == "logistic":
        return rng.logistic(p[0], p[1], n)
    if f == "laplace":
        return rng.laplace(p[0], p[1], n)
    if f == "gumbel":
        return rng.gumbel(p[0], p[1], n)
    if f == "exponential":
        return rng.exponential(p[0], n)
    if f == "gamma":
        return rng.gamma(p[0], p[1], n)
    if f == "lognormal":
        return rng.lognormal(p[0], p[1], n)
    if f == "weibull":
        return p[0] * rng.weibull(p[1], n)
    if f == "uniform":
        return rng.uniform(p[0], p[1], n)
    if f == "beta":
        return rng.beta(p[0], p[1], n)
    mean, sd, skew, kurt = p
    return mean + sd * _standard_sampler(skew, kurt)(rng, n)


GROUPS = ("G1", "G2", "G3", "G4")


def group_distributions(group: str) -> list[DistributionSpec]:
    """The alternative distributions of benchmark group G1-G4.

    Two-parameter entries follow the (shape, scale) reading for gamma,
    (mu, sigma) for lognormal and (scale, shape) for Weibull.
    """
    d = DistributionSpec
    table = {
        "G1": [d("t", (1,)), d("t", (3,)), d("logistic", (0, 1)), d("laplace", (0, 1))],
        "G2": [d("gumbel", (0, 1)), d("gumbel", (0, 2)), d("gumbel", (0, 0.5))],
        "G3": [
            d("exponential", (1,)),
            d("gamma", (1, 2)), d("gamma", (1, 0.5)),
            d("lognormal", (0, 1)), d("lognormal", (0, 2)), d("lognormal", (0, 0.5)),
            d("weibull", (1, 0.5)), d("weibull", (1, 2)),
        ],
        "G4": [
            d("uniform", (0, 1)),
            d("beta", (2, 2)), d("beta", (0.5, 0.5)), d("beta", (3, 1.5)), d("beta", (2, 1)),
        ],
    }
    try:
        return table[group]
    except KeyError:
        raise ValueError(f"unknown group {group!r}; expected one of {GROUPS}") from None
