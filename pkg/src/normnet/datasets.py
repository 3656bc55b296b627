"""Labeled sample corpora: synthesis, splitting, CSV ingestion and persistence.

Dataset files are line-delimited JSON.  The first line is a header object
``{"format_version": 1, "metadata": {...}}``; every following line is one
record ``{"index", "label", "sample", "provenance"}``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import distributions as dist
from .errors import (CatalogTooSmall, DegenerateDenominator, FormatVersionMismatch,
                     InfeasibleSpec, MalformedCsv, MissingColumn)
from .sample import is_degenerate
from .rng import PAIRS, RECORDS, SPLIT, RandomStream, substream

FORMAT_VERSION = 1

# label 1 marks a normal sample, label 0 a non-normal one
NORMAL, NON_NORMAL = 1, 0


@dataclass
class Record:
    sample: np.ndarray
    label: int
    provenance: dict

    @property
    def n(self) -> int:
        return int(self.sample.size)

    def to_json(self, index: int) -> dict:
        return {"index": index, "label": self.label, "sample": self.sample.tolist(),
                "provenance": self.provenance}

    def __eq__(self, other) -> bool:
        return (isinstance(other, Record) and self.label == other.label
                and self.provenance == other.provenance
                and np.array_equal(self.sample, other.sample))


def size_counts(records: Iterable[Record]) -> dict[str, int]:
    """Counts keyed ``"label:n"``, sorted by label then n."""
    c = Counter((r.label, r.n) for r in records)
    return {f"{label}:{n}": c[(label, n)] for label, n in sorted(c)}


@dataclass
class LabeledDataset:
    records: list[Record]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.metadata = dict(self.metadata)
        self.metadata["counts"] = size_counts(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LabeledDataset) and self.metadata == other.metadata
                and self.records == other.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r.n for r in self.records], dtype=np.int64)

    @property
    def samples(self) -> list[np.ndarray]:
        return [r.sample for r in self.records]

    def subset(self, indices, name: str | None = None) -> "LabeledDataset":
        meta = dict(self.metadata)
        if name is not None:
            meta["name"] = name
        return LabeledDataset([self.records[int(i)] for i in indices], meta)

    def validate(self) -> None:
        """Check that labels agree with provenance and counts agree with records."""
        for i, r in enumerate(self.records):
            family = r.provenance.get("family")
            if family in dist.FAMILIES and (family == "normal") != (r.label == NORMAL):
                raise ValueError(f"record {i}: label {r.label} contradicts family {family}")
        if self.metadata.get("counts") != size_counts(self.records):
            raise ValueError("metadata counts do not match the records")


# -- synthesis --------------------------------------------------------------------

def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    return np.round(np.arange(round((hi - lo) / step) + 1) * step + lo, 10)


@dataclass(frozen=True)
class GenSpec:
    sizes: tuple[int, ...]
    per_class_total: int
    master_seed: int = 0
    mean_range: tuple[float, float] = (-100.0, 100.0)
    sd_range: tuple[float, float] = (1.0, 20.0)
    skew_range: tuple[float, float] = (-30.0, 30.0)
    kurt_range: tuple[float, float] = (0.0, 40.0)
    grid_step: float = 0.5
    name: str = "A"
    # "variance" treats the value drawn from sd_range as the variance of the
    # non-normal law (normal laws keep it as sd); off by default
    nonnormal_scale: str = "sd"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        if not self.sizes or min(self.sizes) < 3:
            raise InfeasibleSpec("sizes must be non-empty and at least 3")
        if self.per_class_total < len(self.sizes):
            raise InfeasibleSpec("per_class_total must give every size at least one sample")
        if not (self.sd_range[0] > 0 and self.sd_range[1] >= self.sd_range[0]):
            raise InfeasibleSpec("sd_range must be positive and ordered")
        if self.nonnormal_scale not in ("sd", "variance"):
            raise InfeasibleSpec("nonnormal_scale must be 'sd' or 'variance'")

    def quota(self) -> list[int]:
        """Per-size quota for each class; any remainder goes to the smallest sizes."""
        base, extra = divmod(self.per_class_total, len(self.sizes))
        return [base + (i < extra) for i in range(len(self.sizes))]

    def to_json(self) -> dict:
        return {"sizes": list(self.sizes), "per_class_total": self.per_class_total,
                "master_seed": self.master_seed, "mean_range": list(self.mean_range),
                "sd_range": list(self.sd_range), "skew_range": list(self.skew_range),
                "kurt_range": list(self.kurt_range), "grid_step": self.grid_step,
                "name": self.name, "nonnormal_scale": self.nonnormal_scale}


PRESET_SIZES = {
    "A": tuple(range(10, 101, 10)),
    "B": tuple(range(5, 96, 10)),
    "D": tuple(range(10, 101, 10)),
    "large": (250, 500, 1000),
}
FULL_PER_CLASS = {"A": 13050, "B": 13050, "D": 13050, "large": 7830}
DESK_PER_CLASS = 2000


def preset(name: str, per_class_total: int | None = None, master_seed: int = 0,
           sizes: Sequence[int] | None = None, nonnormal_scale: str = "sd") -> GenSpec:
    if name not in PRESET_SIZES:
        raise InfeasibleSpec(f"unknown preset {name!r}")
    return GenSpec(sizes=tuple(sizes or PRESET_SIZES[name]),
                   per_class_total=per_class_total or DESK_PER_CLASS,
                   master_seed=master_seed, name=name, nonnormal_scale=nonnormal_scale)


def feasible_pairs(spec: GenSpec) -> list[tuple[float, float]]:
    """Grid (skew, kurt) pairs that define a non-normal Pearson law.

    The normal point (0, 3) and pairs whose moment denominator C vanishes are
    dropped.
    """
    out = []
    for s in _grid(*spec.skew_range, spec.grid_step):
        for k in _grid(*spec.kurt_range, spec.grid_step):
            if not dist.pearson_feasible(s, k) or (s == 0 and k == 3):
                continue
            try:
                dist.pearson_from_moments(0.0, 1.0, float(s), float(k))
            except DegenerateDenominator:
                continue
            out.append((float(s), float(k)))
    return out


def _draw_location_scale(spec: GenSpec, rng: RandomStream) -> tuple[float, float]:
    return float(rng.uniform(*spec.mean_range)), float(rng.uniform(*spec.sd_range))


def _make_record(spec: GenSpec, n: int, label: int, pair, index: int) -> Record:
    rng = substream(spec.master_seed, RECORDS, index)
    mu, sigma = _draw_location_scale(spec, rng)
    if label == NORMAL:
        law = dist.normal(mu, sigma)
    else:
        if spec.nonnormal_scale == "variance":
            sigma = math.sqrt(sigma)
        law = dist.pearson(mu, sigma, *pair)
    prov = law.to_json()
    prov["seed_index"] = index
    return Record(_nonconstant_draw(law, n, rng), label, prov)


MAX_REDRAWS = 100


def _nonconstant_draw(law: dist.DistributionSpec, n: int, rng: RandomStream) -> np.ndarray:
    # Pearson laws next to the feasibility boundary put nearly all their mass
    # on one point, and small draws can come out constant up to rounding;
    # such samples have no standardized form, so draw again
    for _ in range(MAX_REDRAWS):
        x = law.sample(n, rng)
        if not is_degenerate(x):
            return x
    raise InfeasibleSpec(f"{law} keeps producing constant samples of size {n}")


def generate_pearson_style_set(spec: GenSpec, rng: RandomStream | None = None) -> LabeledDataset:
    """Balanced normal vs Pearson corpus.

    For each size, the normal class gets random N(mu, sigma) samples and the
    non-normal class cycles through the shuffled feasible grid, drawing a
    fresh (mu, sigma) per visit.  Record ``i`` uses the substream
    ``(master_seed, RECORDS, i)``; ``rng`` only shuffles the grid and defaults
    to ``(master_seed, PAIRS)``.
    """
    pairs = feasible_pairs(spec)
    if not pairs:
        raise InfeasibleSpec("no feasible (skew, kurt) pairs on the grid")
    rng = rng if rng is not None else substream(spec.master_seed, PAIRS)
    order = rng.permutation(len(pairs))
    pairs = [pairs[i] for i in order]
    records = []
    for n, quota in zip(spec.sizes, spec.quota()):
        for j in range(quota):
            records.append(_make_record(spec, n, NORMAL, None, len(records)))
        for j in range(quota):
            records.append(_make_record(spec, n, NON_NORMAL, pairs[j % len(pairs)], len(records)))
    meta = {"name": spec.name, "master_seed": spec.master_seed, "generator": spec.to_json()}
    return LabeledDataset(records, meta)


def generate_group_set(group: str, sizes: Sequence[int], per_size: int,
                       master_seed: int = 0) -> LabeledDataset:
    """Non-normal samples cycling over the distributions of one benchmark group."""
    if per_size < 1:
        raise InfeasibleSpec("per_size must be at least 1")
    laws = dist.group_distributions(group)
    gkey = dist.GROUPS.index(group) + 1
    records = []
    for n in sizes:
        for j in range(per_size):
            index = len(records)
            law = laws[j % len(laws)]
            prov = law.to_json()
            prov["group"] = group
            prov["seed_index"] = index
            rng = substream(master_seed, RECORDS, 100 + gkey, index)
            records.append(Record(_nonconstant_draw(law, int(n), rng), NON_NORMAL, prov))
    meta = {"name": f"C-{group}", "master_seed": master_seed,
            "generator": {"group": group, "sizes": [int(n) for n in sizes], "per_size": per_size}}
    return LabeledDataset(records, meta)


def split_cv_test(data: LabeledDataset, cv_fraction: float = 0.7,
                  rng: RandomStream | None = None) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified (label, n) split into a cross-validation part and a test part."""
    if not 0 < cv_fraction < 1:
        raise ValueError("cv_fraction must lie in (0, 1)")
    rng = rng if rng is not None else substream(data.metadata.get("master_seed", 0), SPLIT)
    strata: dict[tuple[int, int], list[int]] = {}
    for i, r in enumerate(data.records):
        strata.setdefault((r.label, r.n), []).append(i)
    cv, test = [], []
    for key in sorted(strata):
        idx = np.array(strata[key])
        idx = idx[rng.permutation(idx.size)]
        k = int(round(cv_fraction * idx.size))
        cv.extend(idx[:k].tolist())
        test.extend(idx[k:].tolist())
    name = data.metadata.get("name", "data")
    return data.subset(sorted(cv), f"{name}_cv"), data.subset(sorted(test), f"{name}_test")


# -- CSV ingestion ------------------------------------------------------------------

def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise MalformedCsv(f"{path}: empty file")
    return [h.strip().lower() for h in rows[0]], rows[1:]


def _number(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise MalformedCsv(f"row {row}: column {column!r} is not numeric: {cell!r}") from None
    if not math.isfinite(value):
        raise MalformedCsv(f"row {row}: column {column!r} is not finite")
    return value


HEIGHT_WINDOWS = tuple((lo, lo + 10) for lo in range(18, 81))


def ingest_height_csv(path, window: int = 10, min_age: int = 18, max_start: int = 80,
                      min_members: int = 3) -> LabeledDataset:
    """One label-1 sample per (sex, sliding age window) with enough members.

    The CSV needs columns ``height``, ``age`` and ``male`` in any order.  Windows
    are [a, a + window) for a = min_age, ..., max_start.
    """
    header, rows = _read_csv(path)
    cols = {}
    for name in ("height", "age", "male"):
        if name not in header:
            raise MissingColumn(f"{path}: missing column {name!r}")
        cols[name] = header.index(name)
    data = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) < len(header):
            raise MalformedCsv(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        values = {c: _number(row[i], lineno, c) for c, i in cols.items()}
        data.append((values["height"], values["age"], int(values["male"])))
    heights = np.array([d[0] for d in data])
    ages = np.array([d[1] for d in data])
    male = np.array([d[2] for d in data])
    records = []
    for sex in (0, 1):
        for lo in range(min_age, max_start + 1):
            mask = (male == sex) & (ages >= lo) & (ages < lo + window)
            if mask.sum() >= min_members:
                prov = {"source": "height", "male": sex, "age_window": [lo, lo + window]}
                records.append(Record(heights[mask].copy(), NORMAL, prov))
    return LabeledDataset(records, {"name": "height", "source": str(path)})


def ingest_magnitude_csv(path, sizes: Sequence[int], per_size: int,
                         master_seed: int = 0) -> LabeledDataset:
    """Label-0 subsamples of a magnitude catalog (first column, header required).

    Rows within one sample are distinct; different samples are drawn
    independently.
    """
    header, rows = _read_csv(path)
    catalog = []
    for lineno, row in enumerate(rows, start=2):
        catalog.append(_number(row[0], lineno, header[0]))
    catalog = np.array(catalog)
    if sizes and max(sizes) > catalog.size:
        raise CatalogTooSmall(f"catalog has {catalog.size} rows, need {max(sizes)}")
    records = []
    for n in sizes:
        for _ in range(per_size):
            index = len(records)
            rng = substream(master_seed, RECORDS, 200, index)
            rows_idx = rng.choice(catalog.size, size=int(n), replace=False)
            records.append(Record(catalog[rows_idx], NON_NORMAL,
                                  {"source": "magnitude", "seed_index": index}))
    return LabeledDataset(records, {"name": "magnitude", "source": str(path),
                                    "master_seed": master_seed})


# -- persistence --------------------------------------------------------------------

def save_dataset(data: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"format_version": FORMAT_VERSION, "metadata": data.metadata},
                            sort_keys=True) + "\n")
        for i, r in enumerate(data.records):
            fh.write(json.dumps(r.to_json(i), sort_keys=True) + "\n")


def load_dataset(path) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise FormatVersionMismatch(f"{path}: missing header line")
        head = json.loads(first)
        if head.get("format_version") != FORMAT_VERSION:
            raise FormatVersionMismatch(
                f"{path}: format_version {head.get('format_version')} != {FORMAT_VERSION}")
        records = []
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                records.append(Record(np.array(obj["sample"], dtype=np.float64),
                                      int(obj["label"]), obj["provenance"]))
    data = LabeledDataset(records, head["metadata"])
    if data.metadata != head["metadata"]:
        raise ValueError(f"{path}: header counts do not match the records")
    return data


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
