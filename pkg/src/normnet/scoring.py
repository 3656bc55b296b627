"""Apply classifiers and tests to whole datasets.

Every method maps a list of samples to one score per sample: the network's
p1 for DBNN/SBNN and the p-value for a statistical test.  Samples a method
cannot handle (too small, constant, ...) get NaN.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Sequence

import numpy as np

from .errors import NormnetError, NumericalOverflow
from .features import descriptor, sbnn_features
from .neuralnet import Network
from .normality import FssdConfig, anderson_darling, fssd_null, fssd_test, jarque_bera, \
    lilliefors, shapiro_wilk
from .rng import EVAL, NULL, substream

TESTS = ("SW", "LF", "AD", "JB", "AJB", "FSSD")
SBNN_MIN_SIZE = 11


def worker_count() -> int:
    """Worker processes for batch scoring (``NORMNET_WORKERS``, default 1)."""
    try:
        return max(1, int(os.environ.get("NORMNET_WORKERS", "1")))
    except ValueError:
        return 1


def _features(mode: str, q: float, x) -> np.ndarray | None:
    try:
        if mode == "dbnn":
            return descriptor(x, q).to_array()
        if np.size(x) < SBNN_MIN_SIZE:
            return None
        return sbnn_features(x).to_array()
    except NormnetError:
        return None


def feature_matrix(samples: Sequence[np.ndarray], mode: str = "dbnn",
                   q: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Rows of descriptors (``dbnn``) or statistic vectors (``sbnn``) and a validity mask.

    Invalid rows are filled with NaN.
    """
    if mode not in ("dbnn", "sbnn"):
        raise ValueError("mode must be 'dbnn' or 'sbnn'")
    rows = [_features(mode, q, x) for x in samples]
    width = next((r.size for r in rows if r is not None), 0)
    out = np.full((len(rows), width), np.nan)
    ok = np.zeros(len(rows), dtype=bool)
    for i, r in enumerate(rows):
        if r is not None:
            out[i] = r
            ok[i] = True
    return out, ok


def network_scores(net: Network, samples: Sequence[np.ndarray]) -> np.ndarray:
    x, ok = feature_matrix(samples, net.config.mode, net.config.q)
    p = np.full(len(samples), np.nan)
    if ok.any():
        p[ok] = net.predict_proba(x[ok])
    return p


def _pvalue(method: str, fssd: FssdConfig, seed: int, nulls: dict, item) -> float:
    index, x = item
    with warnings.catch_warnings():
        # deep-tail clamping in AD is expected on heavy-tailed corpora
        warnings.simplefilter("ignore", NumericalOverflow)
        return _pvalue_inner(method, fssd, seed, nulls, index, x)


def _pvalue_inner(method, fssd, seed, nulls, index, x) -> float:
    try:
        if method == "SW":
            return shapiro_wilk(x).p_value
        if method == "LF":
            return lilliefors(x).p_value
        if method == "AD":
            return anderson_darling(x).p_value
        if method == "JB":
            return jarque_bera(x).p_value
        if method == "AJB":
            return jarque_bera(x, adjusted=True).p_value
        if method == "FSSD":
            return fssd_test(x, fssd, rng=substream(seed, EVAL, index),
                             null=nulls.get(np.size(x))).p_value
    except NormnetError:
        return float("nan")
    raise ValueError(f"unknown test {method!r}")


def test_pvalues(method: str, samples: Sequence[np.ndarray], seed: int = 0,
                 fssd: FssdConfig | None = None, workers: int | None = None) -> np.ndarray:
    """p-value of ``method`` for every sample (NaN where the test is undefined).

    FSSD uses one bootstrap null table per sample size, which is valid because
    the scaled statistic is pivotal under the median-heuristic bandwidth.
    """
    method = method.upper()
    fssd = fssd or FssdConfig()
    nulls = {}
    if method == "FSSD" and fssd.bandwidth is None:
        for n in sorted({np.size(x) for x in samples}):
            if n >= 2:
                nulls[n] = fssd_null(n, fssd, substream(seed, NULL, 7, n))
    fn = partial(_pvalue, method, fssd, seed, nulls)
    items = list(enumerate(samples))
    workers = workers or worker_count()
    if workers > 1 and len(items) > 1000:
        with ProcessPoolExecutor(workers) as pool:
            return np.array(list(pool.map(fn, items, chunksize=256)))
    return np.array([fn(item) for item in items])


def decisions_from_pvalues(p: np.ndarray, alpha: float) -> np.ndarray:
    """1 (normal) when p >= alpha, 0 when rejected, -1 when undefined."""
    out = np.where(p >= alpha, 1, 0)
    out[~np.isfinite(p)] = -1
    return out


def decisions_from_probabilities(p1: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    out = np.where(p1 >= threshold, 1, 0)
    out[~np.isfinite(p1)] = -1
    return out


test_pvalues.__test__ = False  # keep pytest from collecting it when imported
