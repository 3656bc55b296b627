"""Feedforward ReLU classifier with a two-unit softmax head, trained with ADAM.

The same engine backs the descriptor-based network (DBNN) and the
statistic-based network (SBNN); only the input representation differs.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, FormatVersionMismatch, SingleClassData
from .rng import TRAIN, RandomStream, child_seed, substream

FORMAT_VERSION = 1


@dataclass(frozen=True)
class AdamConfig:
    step: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class EarlyStopConfig:
    validation_fraction: float = 0.1
    patience: int = 10
    tol: float = 1e-4


@dataclass(frozen=True)
class NetworkConfig:
    hidden_layers: tuple[int, ...] = (100, 10)
    q: float = 0.1
    reg_c: float = 0.1
    max_epochs: int = 200
    adam: AdamConfig = field(default_factory=AdamConfig)
    early_stop: EarlyStopConfig = field(default_factory=EarlyStopConfig)
    batch_size: int = 128
    seed: int = 0
    mode: str = "dbnn"
    # True: penalty reg_c/(2B)*||W||^2 on a batch of B examples; False: reg_c/2*||W||^2
    penalty_per_example: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if not self.hidden_layers or min(self.hidden_layers) < 1:
            raise ValueError("hidden_layers must be a non-empty list of positive sizes")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if not 0 < self.early_stop.validation_fraction < 0.5:
            raise ValueError("validation_fraction must lie in (0, 0.5)")
        if self.reg_c < 0:
            raise ValueError("reg_c must be non-negative")
        if self.mode not in ("dbnn", "sbnn"):
            raise ValueError("mode must be 'dbnn' or 'sbnn'")

    def to_json(self) -> dict:
        out = asdict(self)
        out["hidden_layers"] = list(self.hidden_layers)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "NetworkConfig":
        obj = dict(obj)
        obj["adam"] = AdamConfig(**obj.get("adam", {}))
        obj["early_stop"] = EarlyStopConfig(**obj.get("early_stop", {}))
        obj["hidden_layers"] = tuple(obj["hidden_layers"])
        return cls(**obj)


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    norm_mean: np.ndarray
    norm_sd: np.ndarray
    config: NetworkConfig
    threshold: float = 0.5

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                       self.norm_mean.copy(), self.norm_sd.copy(), self.config, self.threshold)

    def logits(self, inputs) -> np.ndarray:
        x = self._check(inputs)
        h = (x - self.norm_mean) / self.norm_sd
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict_proba(self, inputs) -> np.ndarray:
        """Class-1 (normal) probability for each row of ``inputs``."""
        z = self.logits(inputs)
        # two-unit softmax reduces to a logistic of the logit difference
        return _sigmoid(z[:, 1] - z[:, 0])

    def predict(self, inputs) -> np.ndarray:
        return (self.predict_proba(inputs) >= self.threshold).astype(np.int64)

    def _check(self, inputs) -> np.ndarray:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} features, got shape {x.shape}")
        return x

    def weight_norm2(self) -> float:
        return float(sum(np.sum(w * w) for w in self.weights))

    # -- model file ---------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_json(),
            "input_dim": self.input_dim,
            "normalizer": {"mean": self.norm_mean.tolist(), "sd": self.norm_sd.tolist()},
            "layers": [{"weights": w.tolist(), "biases": b.tolist()}
                       for w, b in zip(self.weights, self.biases)],
            "threshold": self.threshold,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Network":
        if obj.get("format_version") != FORMAT_VERSION:
            raise FormatVersionMismatch(
                f"model format {obj.get('format_version')} != {FORMAT_VERSION}")
        weights = [np.array(layer["weights"], dtype=np.float64) for layer in obj["layers"]]
        biases = [np.array(layer["biases"], dtype=np.float64) for layer in obj["layers"]]
        net = cls(weights, biases, np.array(obj["normalizer"]["mean"], dtype=np.float64),
                  np.array(obj["normalizer"]["sd"], dtype=np.float64),
                  NetworkConfig.from_json(obj["config"]), float(obj["threshold"]))
        if net.input_dim != obj["input_dim"]:
            raise DimensionMismatch("input_dim does not match the first weight matrix")
        return net

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def init(cfg: NetworkConfig, input_dim: int) -> Network:
    """He-initialized network (N(0, 2/fan_in) weights, zero biases)."""
    if input_dim < 1:
        raise ValueError("input_dim must be positive")
    rng = substream(cfg.seed, TRAIN, 0)
    sizes = [input_dim, *cfg.hidden_layers, 2]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, np.zeros(input_dim), np.ones(input_dim), cfg)


def forward(net: Network, inputs) -> float | np.ndarray:
    """p1 for one input vector (float) or a matrix of inputs (array)."""
    p = net.predict_proba(inputs)
    return float(p[0]) if np.ndim(inputs) == 1 else p


def classify(net: Network, p1: float) -> int:
    return int(p1 >= net.threshold)


def fit_normalizer(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    # constant columns are centered but left unscaled
    sd = np.where(sd > 0, sd, 1.0)
    return mean, sd


def loss_and_gradient(net: Network, inputs, labels) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy plus an L2 penalty on the weight matrices.

    The penalty is (reg_c / 2B) * ||W||^2 for a batch of size B, or
    (reg_c / 2) * ||W||^2 when ``config.penalty_per_example`` is off.

    Returns the objective and its exact gradients with respect to the weight
    matrices and bias vectors.  Biases are not penalized.
    """
    x = net._check(inputs)
    y = np.asarray(labels, dtype=np.int64).ravel()
    if x.shape[0] == 0:
        raise EmptyDataset("empty batch")
    if y.size != x.shape[0]:
        raise DimensionMismatch("labels and inputs differ in length")
    batch = x.shape[0]
    acts = [(x - net.norm_mean) / net.norm_sd]
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    z = acts[-1] @ net.weights[-1] + net.biases[-1]
    zmax = z.max(axis=1, keepdims=True)
    logsum = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    rows = np.arange(batch)
    penalty_scale = net.config.reg_c / (batch if net.config.penalty_per_example else 1)
    loss = float(np.mean(logsum - z[rows, y])) + 0.5 * penalty_scale * net.weight_norm2()

    delta = np.exp(z - logsum[:, None])
    delta[rows, y] -= 1.0
    delta /= batch
    grad_w: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for layer in range(len(net.weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta + penalty_scale * net.weights[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ net.weights[layer].T) * (acts[layer] > 0)
    return loss, grad_w, grad_b


def log_loss(net: Network, inputs, labels) -> float:
    """Mean cross-entropy without the penalty."""
    y = np.asarray(labels, dtype=np.int64).ravel()
    p1 = np.clip(net.predict_proba(inputs), 1e-300, 1.0)
    p0 = np.clip(1.0 - net.predict_proba(inputs), 1e-300, 1.0)
    return float(-np.mean(np.where(y == 1, np.log(p1), np.log(p0))))


def objective(net: Network, inputs, labels) -> float:
    return loss_and_gradient(net, inputs, labels)[0]


@dataclass
class TrainReport:
    epochs_run: int
    train_loss_history: list[float]
    val_loss_history: list[float]
    wall_time_seconds: float
    best_epoch: int = 0


def stratified_holdout(labels: np.ndarray, fraction: float, rng: RandomStream) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (train, held-out) with ``fraction`` of every class held out."""
    train, held = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        k = max(1, int(round(fraction * idx.size)))
        held.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(held))


def train(net: Network, inputs, labels, cfg: NetworkConfig | None = None,
          rng: RandomStream | None = None) -> tuple[Network, TrainReport]:
    """ADAM on shuffled mini-batches with early stopping on validation log-loss.

    The normalizer is fitted on the training split.  The returned network holds
    the parameters of the epoch with the lowest validation loss.
    """
    started = time.perf_counter()
    cfg = cfg or net.config
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).ravel()
    if x.shape[0] == 0:
        raise EmptyDataset("no training examples")
    counts = np.bincount(y, minlength=2)
    if counts.size != 2 or counts.min() < 2:
        raise SingleClassData(f"need at least two examples of each class, got {counts.tolist()}")
    rng = rng if rng is not None else substream(cfg.seed, TRAIN, 1)

    tr, va = stratified_holdout(y, cfg.early_stop.validation_fraction, rng)
    xt, yt, xv, yv = x[tr], y[tr], x[va], y[va]
    net = net.copy()
    net.config = cfg
    net.norm_mean, net.norm_sd = fit_normalizer(xt)

    params = net.weights + net.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    a = cfg.adam
    step = 0
    best_loss, best_epoch, best = math.inf, 0, net.copy()
    stall = 0
    train_hist, val_hist = [], []
    n_train = yt.size
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, gw, gb = loss_and_gradient(net, xt[batch], yt[batch])
            step += 1
            lr = a.step * math.sqrt(1 - a.beta2**step) / (1 - a.beta1**step)
            for p, g, mi, vi in zip(params, gw + gb, m, v):
                mi *= a.beta1
                mi += (1 - a.beta1) * g
                vi *= a.beta2
                vi += (1 - a.beta2) * (g * g)
                p -= lr * mi / (np.sqrt(vi) + a.eps)
        train_hist.append(objective(net, xt, yt))
        val = log_loss(net, xv, yv)
        val_hist.append(val)
        if val < best_loss - cfg.early_stop.tol:
            best_loss, best_epoch, best = val, epoch, net.copy()
            stall = 0
        else:
            stall += 1
            if stall >= cfg.early_stop.patience:
                break
    report = TrainReport(len(train_hist), train_hist, val_hist,
                         time.perf_counter() - started, best_epoch)
    return best, report


def fit(inputs, labels, cfg: NetworkConfig, rng: RandomStream | None = None) -> tuple[Network, TrainReport]:
    """Initialize and train a network on a feature matrix."""
    x = np.asarray(inputs, dtype=np.float64)
    return train(init(cfg, x.shape[1]), x, labels, cfg, rng)


def accuracy(net: Network, inputs, labels) -> float:
    return float(np.mean(net.predict(inputs) == np.asarray(labels)))


# -- model selection --------------------------------------------------------------

def stratified_folds(strata: np.ndarray, k: int, rng: RandomStream) -> list[np.ndarray]:
    """Partition indices into ``k`` folds, dealing every stratum round-robin."""
    if k < 2:
        raise ValueError("need at least two folds")
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for key in np.unique(strata, axis=0):
        mask = np.all(strata == key, axis=1) if strata.ndim > 1 else strata == key
        idx = np.flatnonzero(mask)
        idx = idx[rng.permutation(idx.size)]
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(int(i))
        offset += idx.size
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


@dataclass
class CvCell:
    q: float
    hidden_layers: tuple[int, ...]
    reg_c: float
    accuracies: list[float]
    fit_times: list[float]

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_sd(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def time_mean(self) -> float:
        return float(np.mean(self.fit_times))

    @property
    def time_sd(self) -> float:
        return float(np.std(self.fit_times))


Featurizer = Callable[[float], tuple[np.ndarray, np.ndarray]]

FULL_GRID = {
    "q": (0.05, 0.1),
    "hidden_layers": ((100, 10), (1000,)),
    "reg_c": (0.1, 1.0, 10.0),
}


def grid_search_cv(featurize: Featurizer, grid: dict, k: int = 5,
                   rng: RandomStream | None = None, base: NetworkConfig | None = None,
                   strata: np.ndarray | None = None) -> tuple[NetworkConfig, list[CvCell]]:
    """Exhaustive k-fold search over q, architecture and reg_c.

    ``featurize(q)`` returns ``(X, y)`` for the descriptor granularity ``q``;
    rows must be in the same order for every q.  Folds are shared by all cells.
    """
    base = base or NetworkConfig()
    rng = rng if rng is not None else substream(base.seed, TRAIN, 2)
    qs, archs, cs = grid["q"], grid["hidden_layers"], grid["reg_c"]
    if not (qs and archs and cs):
        raise ValueError("grid must not be empty")
    folds = None
    cells = []
    for q in qs:
        x, y = featurize(q)
        if folds is None:
            folds = stratified_folds(y if strata is None else strata, k, rng)
            fold_seeds = [child_seed(rng) for _ in range(k)]
        for arch in archs:
            for c in cs:
                cfg = replace(base, q=q, hidden_layers=tuple(arch), reg_c=c)
                accs, times = [], []
                for j, test_idx in enumerate(folds):
                    train_idx = np.concatenate([f for i, f in enumerate(folds) if i != j])
                    started = time.perf_counter()
                    net, _ = fit(x[train_idx], y[train_idx], replace(cfg, seed=fold_seeds[j]),
                                 substream(fold_seeds[j], TRAIN, 3))
                    times.append(time.perf_counter() - started)
                    accs.append(accuracy(net, x[test_idx], y[test_idx]))
                cells.append(CvCell(q, tuple(arch), c, accs, times))
    best = max(cells, key=lambda cell: (cell.accuracy_mean, -sum(cell.hidden_layers), cell.reg_c))
    return replace(base, q=best.q, hidden_layers=best.hidden_layers, reg_c=best.reg_c), cells


@dataclass
class LearningPoint:
    fraction: float
    train_accuracies: list[float]
    test_accuracies: list[float]
    fit_times: list[float]

    @property
    def median_train(self) -> float:
        return float(np.median(self.train_accuracies))

    @property
    def median_test(self) -> float:
        return float(np.median(self.test_accuracies))


def learning_curve(inputs, labels, fractions: Sequence[float], folds: int,
                   cfg: NetworkConfig, rng: RandomStream | None = None) -> list[LearningPoint]:
    """Train/test accuracy and fit time on growing random subsets, k-fold each."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    rng = rng if rng is not None else substream(cfg.seed, TRAIN, 4)
    out = []
    for frac in fractions:
        if not 0 < frac <= 1:
            raise ValueError(f"fraction {frac} outside (0, 1]")
        if frac < 1:
            _, subset = stratified_holdout(y, frac, rng)
        else:
            subset = np.arange(y.size)
        xs, ys = x[subset], y[subset]
        parts = stratified_folds(ys, folds, rng)
        point = LearningPoint(frac, [], [], [])
        for j, test_idx in enumerate(parts):
            train_idx = np.concatenate([f for i, f in enumerate(parts) if i != j])
            seed = child_seed(rng)
            started = time.perf_counter()
            net, _ = fit(xs[train_idx], ys[train_idx], replace(cfg, seed=seed),
                         substream(seed, TRAIN, 3))
            point.fit_times.append(time.perf_counter() - started)
            point.train_accuracies.append(accuracy(net, xs[train_idx], ys[train_idx]))
            point.test_accuracies.append(accuracy(net, xs[test_idx], ys[test_idx]))
        out.append(point)
    return out
