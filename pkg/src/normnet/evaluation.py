"""Classification metrics, ROC analysis, reliability diagrams and report tables.

Label 1 is the normal (positive) class throughout.  Statistical tests enter
the ROC machinery with their p-value as the score, so a higher score always
means "more normal".
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, SingleClassLabels, TooFewPoints

METRIC_NAMES = ("a", "tpr", "ppv", "tnr", "npv", "f1")


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class Metrics:
    tp: int
    fn: int
    tn: int
    fp: int
    a: float | None
    tpr: float | None
    ppv: float | None
    tnr: float | None
    npv: float | None
    f1: float | None

    @property
    def count(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    @classmethod
    def from_counts(cls, tp: int, fn: int, tn: int, fp: int) -> "Metrics":
        tpr = _ratio(tp, tp + fn)
        ppv = _ratio(tp, tp + fp)
        f1 = None
        if tpr is not None and ppv is not None and tpr + ppv > 0:
            f1 = 2 * tpr * ppv / (tpr + ppv)
        return cls(tp, fn, tn, fp, _ratio(tp + tn, tp + fn + tn + fp), tpr, ppv,
                   _ratio(tn, tn + fp), _ratio(tn, tn + fn), f1)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _pair(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions).astype(np.int64).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if p.size != y.size:
        raise LengthMismatch(f"{p.size} predictions for {y.size} labels")
    if p.size == 0:
        raise LengthMismatch("no predictions")
    return p, y


def confusion_metrics(predictions, labels) -> Metrics:
    p, y = _pair(predictions, labels)
    tp = int(np.sum((p == 1) & (y == 1)))
    fn = int(np.sum((p == 0) & (y == 1)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fp = int(np.sum((p == 1) & (y == 0)))
    return Metrics.from_counts(tp, fn, tn, fp)


# -- ROC ------------------------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    """Operating points for thresholds in descending order.

    Point ``i`` classifies ``score >= thresholds[i]`` as positive; the first
    threshold is +inf, giving (0, 0).
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float

    def to_json(self) -> dict:
        thresholds = [t if math.isfinite(t) else None for t in self.thresholds.tolist()]
        return {"thresholds": thresholds, "fpr": self.fpr.tolist(),
                "tpr": self.tpr.tolist(), "auroc": self.auroc}


def roc(scores, labels) -> RocCurve:
    s = np.asarray(scores, dtype=np.float64).ravel()
    _, y = _pair(np.zeros(s.size), labels)
    pos = int(np.sum(y == 1))
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise SingleClassLabels("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of every run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tps = np.cumsum(y == 1)[ends]
    fps = (ends + 1) - tps
    tpr = np.r_[0.0, tps / pos]
    fpr = np.r_[0.0, fps / neg]
    thresholds = np.r_[np.inf, s[ends]]
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2)
    return RocCurve(thresholds, fpr, tpr, area)


def auroc(scores, labels) -> float:
    return roc(scores, labels).auroc


def optimal_threshold(curve: RocCurve) -> float:
    """Threshold of the point nearest (0, 1); ties go to the higher threshold."""
    dist = np.hypot(curve.fpr, 1.0 - curve.tpr)
    best = dist.min()
    # thresholds are descending, so the first tied point has the highest one
    i = int(np.flatnonzero(dist <= best + 1e-12)[0])
    return float(curve.thresholds[i])


# -- calibration ----------------------------------------------------------------------

@dataclass(frozen=True)
class ReliabilityBin:
    mean_predicted: float
    empirical_positive_rate: float
    count: int


def reliability(probabilities, labels, n_bins: int = 10) -> list[ReliabilityBin]:
    """Equal-count bins over the probabilities sorted ascending."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    _, y = _pair(np.zeros(p.size), labels)
    if n_bins < 2:
        raise TooFewPoints("need at least two bins")
    if p.size < n_bins:
        raise TooFewPoints(f"{p.size} points cannot fill {n_bins} bins")
    order = np.argsort(p, kind="mergesort")
    bins = []
    for chunk in np.array_split(order, n_bins):
        bins.append(ReliabilityBin(float(p[chunk].mean()), float(y[chunk].mean()), int(chunk.size)))
    return bins


def reliability_subsets(probabilities, labels, n_bins: int, subsets: int, subset_size: int,
                        rng) -> list[list[ReliabilityBin]]:
    """Diagrams of random subsets, drawn without replacement within a subset."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    out = []
    for _ in range(subsets):
        idx = rng.choice(p.size, size=min(subset_size, p.size), replace=False)
        out.append(reliability(p[idx], y[idx], n_bins))
    return out


# -- reports --------------------------------------------------------------------------

@dataclass
class ReportRow:
    key: str
    metrics: Metrics
    auroc: float | None = None


def per_size_report(predictions, labels, sizes, scores=None) -> list[ReportRow]:
    """Metrics per sample size plus a pooled ``overall`` row.

    Entries whose prediction is negative (e.g. -1 for a failed feature
    extraction) are left out.
    """
    p, y = _pair(predictions, labels)
    n = np.asarray(sizes).ravel()
    if n.size != y.size:
        raise LengthMismatch("sizes and labels differ in length")
    s = None if scores is None else np.asarray(scores, dtype=np.float64).ravel()
    ok = p >= 0
    rows = []
    for key, mask in [(str(int(v)), ok & (n == v)) for v in np.unique(n[ok])] + [("overall", ok)]:
        if not mask.any():
            continue
        m = confusion_metrics(p[mask], y[mask])
        area = None
        if s is not None and 0 < y[mask].sum() < mask.sum():
            area = auroc(s[mask], y[mask])
        rows.append(ReportRow(key, m, area))
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def metrics_csv(rows: Sequence[ReportRow], method: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = (["method"] if method else []) + ["n", "count", "A", "TPR", "PPV", "TNR", "NPV", "F1", "AUROC"]
    w.writerow(head)
    for r in rows:
        m = r.metrics
        w.writerow(([method] if method else []) + [r.key, m.count]
                   + [_cell(getattr(m, k)) for k in METRIC_NAMES] + [_cell(r.auroc)])
    return buf.getvalue()


def power_table(predictions_by_method: dict[str, np.ndarray], sizes) -> str:
    """TNR per size for each method on an all-negative set (one column per method)."""
    n = np.asarray(sizes).ravel()
    methods = list(predictions_by_method)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *methods])
    keys = [(str(int(v)), n == v) for v in np.unique(n)] + [("overall", np.ones(n.size, bool))]
    for key, mask in keys:
        row = [key]
        for method in methods:
            p = np.asarray(predictions_by_method[method]).ravel()[mask]
            p = p[p >= 0]
            row.append(_cell(float(np.mean(p == 0))) if p.size else "")
        w.writerow(row)
    return buf.getvalue()


def reliability_csv(bins: Sequence[ReliabilityBin]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin", "mean_predicted", "empirical_positive_rate", "count"])
    for i, b in enumerate(bins):
        w.writerow([i, _cell(b.mean_predicted), _cell(b.empirical_positive_rate), b.count])
    return buf.getvalue()


def roc_json(curves: dict[str, RocCurve]) -> str:
    return json.dumps({name: c.to_json() for name, c in curves.items()})


@dataclass
class ThresholdRow:
    n: int
    threshold: float
    default: Metrics
    tuned: Metrics
    auroc: float
    default_threshold: float = 0.5


def threshold_report(probabilities, labels, sizes, default: float = 0.5) -> list[ThresholdRow]:
    """Per-size ROC-optimal thresholds and the metrics before and after."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    n = np.asarray(sizes).ravel()
    rows = []
    for v in np.unique(n):
        mask = (n == v) & np.isfinite(p)
        curve = roc(p[mask], y[mask])
        t = optimal_threshold(curve)
        rows.append(ThresholdRow(int(v), t,
                                 confusion_metrics(p[mask] >= default, y[mask]),
                                 confusion_metrics(p[mask] >= t, y[mask]), curve.auroc, default))
    return rows


def threshold_csv(rows: Sequence[ThresholdRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "threshold", "A", "TPR", "PPV", "TNR", "NPV", "F1", "AUROC"])
    for r in rows:
        for t, m in ((r.default_threshold, r.default), (r.threshold, r.tuned)):
            w.writerow([r.n, _cell(float(t))] + [_cell(getattr(m, k)) for k in METRIC_NAMES]
                       + [_cell(r.auroc)])
    return buf.getvalue()
