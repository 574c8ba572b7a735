"""Dataset ingestion, class statistics and stratified fold plans."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

LABEL_FIRST = "first"
LABEL_LAST = "last"
MISSING_TOKENS = frozenset({"", "?", "na", "nan", "NA", "NaN"})


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Labeled feature matrix with contiguous class indices.

    ``labels[i]`` indexes into ``class_names``; every class occurs at least once.
    Arrays are read-only so a Dataset can be shared between workers.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DataError("labels length does not match feature rows")
        if x.shape[0] == 0:
            raise DataError("dataset has zero rows")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        nc = len(self.class_names)
        if y.min() < 0 or y.max() >= nc:
            raise DataError("label index out of range")
        counts = np.bincount(y, minlength=nc)
        if np.any(counts == 0):
            missing = [self.class_names[i] for i in np.flatnonzero(counts == 0)]
            raise DataError(f"class with zero samples: {missing}")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """Rows at ``indices`` with the same class indexing; every class must survive."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_names, self.name)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.class_names, self.name)


def _parse_float(tok: str) -> float:
    tok = tok.strip()
    if tok in MISSING_TOKENS:
        return math.nan
    try:
        return float(tok)
    except ValueError:
        return math.nan


def load_csv(
    path,
    label_column: str | int = LABEL_LAST,
    has_header: bool = False,
    missing_policy: str = "drop_row",
    name: str | None = None,
) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    ``label_column`` is ``"first"``, ``"last"`` or a zero-based column index.
    Class indices follow order of first appearance. Unparseable or missing
    feature fields (``?``, empty) are handled by ``missing_policy``:
    ``"drop_row"`` removes the row, ``"mean_impute"`` replaces the field with
    the column mean of the parseable values.
    """
    if missing_policy not in ("drop_row", "mean_impute"):
        raise DataError(f"unknown missing_policy {missing_policy!r}")
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(t.strip() for t in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    for lineno, r in enumerate(rows, start=2 if has_header else 1):
        if len(r) != width:
            raise DataError(f"{path}: ragged row {lineno} ({len(r)} fields, expected {width})")
    if width < 2:
        raise DataError(f"{path}: need a label column and at least one feature")

    if label_column == LABEL_FIRST:
        li = 0
    elif label_column == LABEL_LAST:
        li = width - 1
    else:
        li = int(label_column)
        if not -width <= li < width:
            raise DataError(f"{path}: label column {li} out of range")
        li %= width

    raw_labels = [r[li].strip() for r in rows]
    x = np.array(
        [[_parse_float(t) for j, t in enumerate(r) if j != li] for r in rows],
        dtype=np.float64,
    )
    bad = ~np.isfinite(x)
    keep = np.ones(len(rows), dtype=bool)
    if missing_policy == "drop_row":
        keep = ~bad.any(axis=1)
    elif bad.any():
        col_ok = np.where(bad, 0.0, x)
        n_ok = (~bad).sum(axis=0)
        if np.any(n_ok == 0):
            raise DataError(f"{path}: a feature column has no parseable values")
        means = col_ok.sum(axis=0) / n_ok
        x = np.where(bad, means[None, :], x)
    # label cells that are missing cannot be imputed
    keep &= np.array([lab not in MISSING_TOKENS for lab in raw_labels])
    x = x[keep]
    raw_labels = [lab for lab, k in zip(raw_labels, keep) if k]
    if not raw_labels:
        raise DataError(f"{path}: zero rows after missing-value handling")

    order: dict[str, int] = {}
    for lab in raw_labels:
        order.setdefault(lab, len(order))
    if len(order) < 2:
        raise DataError(f"{path}: class count < 2")
    y = np.array([order[lab] for lab in raw_labels], dtype=np.int64)
    return Dataset(x, y, tuple(order), name or path.stem)


def class_centroid(ds: Dataset, c: int) -> np.ndarray:
    if not 0 <= c < ds.n_classes:
        raise IndexError(f"class index {c} out of range")
    return ds.features[ds.labels == c].mean(axis=0)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score transform fitted on training rows only."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        # constant columns pass through centred but unscaled
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale


@dataclass(frozen=True)
class FoldPlan:
    """``assignments[r][i]`` is the test fold of sample ``i`` in repeat ``r``."""

    assignments: np.ndarray
    k: int
    seed: int
    generator: str = field(default="numpy.PCG64(SeedSequence([seed, repeat, class]))")

    @property
    def repeats(self) -> int:
        return self.assignments.shape[0]

    def splits(self):
        """Yield ``(repeat, fold, train_idx, test_idx)`` in (repeat, fold) order."""
        for r in range(self.repeats):
            row = self.assignments[r]
            for f in range(self.k):
                test = np.flatnonzero(row == f)
                train = np.flatnonzero(row != f)
                yield r, f, train, test


def stratified_folds(ds: Dataset, k: int = 10, repeats: int = 10, seed: int = 42) -> FoldPlan:
    """Repeated stratified k-fold plan.

    Each class's indices are permuted with a PCG64 generator seeded from
    ``SeedSequence([seed, repeat, class])`` and dealt round-robin onto folds.
    The deal position carries over between classes so total fold sizes also
    stay within one of each other.
    """
    if k < 2:
        raise DataError("k must be >= 2")
    if repeats < 1:
        raise DataError("repeats must be >= 1")
    counts = ds.class_counts
    if counts.min() < k:
        small = [ds.class_names[c] for c in np.flatnonzero(counts < k)]
        raise DataError(f"class smaller than k={k}: {small}")
    if seed < 0:
        raise DataError("seed must be non-negative")

    table = np.empty((repeats, ds.n_samples), dtype=np.int64)
    for r in range(repeats):
        offset = 0
        for c in range(ds.n_classes):
            members = np.flatnonzero(ds.labels == c)
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, r, c])))
            members = rng.permutation(members)
            table[r, members] = (offset + np.arange(members.size)) % k
            offset = (offset + members.size) % k
    return FoldPlan(_frozen(table), k, seed)


@dataclass(frozen=True)
class DatasetSource:
    filename: str
    label_column: str | int
    has_header: bool
    missing_policy: str = "drop_row"


# the five benchmark sets; files live under data/ (see data/README.md)
UCI_DATASETS = {
    "dermatology": DatasetSource("dermatology.data", LABEL_LAST, False, "drop_row"),
    "wine": DatasetSource("wine.csv", LABEL_FIRST, True),
    "iris": DatasetSource("iris.csv", LABEL_LAST, True),
    "thyroid": DatasetSource("new-thyroid.data", LABEL_FIRST, False),
    "vehicle": DatasetSource("vehicle.csv", LABEL_LAST, True),
}


def load_named(name: str, data_dir="data") -> Dataset:
    try:
        src = UCI_DATASETS[name]
    except KeyError:
        raise DataError(f"unknown dataset {name!r}; known: {', '.join(UCI_DATASETS)}") from None
    return load_csv(Path(data_dir) / src.filename, src.label_column, src.has_header, src.missing_policy, name=name)


def leave_one_out(ds: Dataset) -> FoldPlan:
    """Single-repeat plan with one test sample per fold (not stratified)."""
    return FoldPlan(_frozen(np.arange(ds.n_samples)[None, :]), ds.n_samples, 0, "leave-one-out")
