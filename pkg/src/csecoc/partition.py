"""Centroid-distance criterion for class bipartitions and the floating search over it."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .data import Dataset

DEFAULT_EPS = 1e-9
REL_TOL = 1e-12
MAX_EXHAUSTIVE_CLASSES = 20


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


class ClassStats:
    """Per-class sums, counts and centroids of one dataset.

    Group centroids are sample-weighted: sum of member-class sums over the
    total member count, which equals the mean over all samples in the group.
    """

    def __init__(self, ds: Dataset):
        nc = ds.n_classes
        self.n_classes = nc
        self.counts = ds.class_counts.astype(np.float64)
        sums = np.zeros((nc, ds.n_features))
        np.add.at(sums, ds.labels, ds.features)
        self.sums = sums
        self.centroids = sums / self.counts[:, None]
        diff = self.centroids[:, None, :] - self.centroids[None, :, :]
        self.pairwise = np.sqrt(np.sum(diff**2, axis=-1))

    def group_centroid(self, g) -> np.ndarray:
        idx = _as_index(g, self.n_classes)
        return self.sums[idx].sum(axis=0) / self.counts[idx].sum()

    def inner_distance(self, g) -> float:
        idx = _as_index(g, self.n_classes)
        t = idx.size
        if t <= 1:
            return 0.0
        sub = self.pairwise[np.ix_(idx, idx)]
        total = float(np.sum(np.triu(sub, k=1)))
        return 2.0 * total / (t * (t - 1))

    def score(self, g1, g2, eps: float = DEFAULT_EPS) -> float:
        i1 = _as_index(g1, self.n_classes)
        i2 = _as_index(g2, self.n_classes)
        if np.intersect1d(i1, i2).size:
            raise ValueError("groups overlap")
        between = euclidean_distance(self.group_centroid(i1), self.group_centroid(i2))
        within = self.inner_distance(i1) + self.inner_distance(i2)
        return between / max(within, eps)


def _as_index(g, nc: int) -> np.ndarray:
    idx = np.array(sorted(set(int(c) for c in g)), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty class group")
    if idx[0] < 0 or idx[-1] >= nc:
        raise IndexError("class index out of range")
    return idx


def inner_group_distance(ds: Dataset, g) -> float:
    """Mean pairwise distance between class centroids of ``g``; 0 for a singleton."""
    return ClassStats(ds).inner_distance(g)


def group_centroid(ds: Dataset, g) -> np.ndarray:
    return ClassStats(ds).group_centroid(g)


def partition_score(ds: Dataset, g1, g2, eps: float = DEFAULT_EPS) -> float:
    """Distance between the two group centroids over the summed inner-group distances.

    The denominator is clamped to ``eps`` so singleton-vs-singleton splits stay finite.
    """
    return ClassStats(ds).score(g1, g2, eps)


@dataclass(frozen=True)
class ClassPartition:
    g1: frozenset
    g2: frozenset
    score: float
    centroid1: np.ndarray
    centroid2: np.ndarray
    # accepted criterion values in search order; empty for non-search results
    trace: tuple = field(default=(), compare=False)

    @property
    def classes(self) -> frozenset:
        return self.g1 | self.g2


def _make_partition(stats: ClassStats, g1, g2, eps, trace=()) -> ClassPartition:
    return ClassPartition(
        frozenset(int(c) for c in g1),
        frozenset(int(c) for c in g2),
        stats.score(g1, g2, eps),
        stats.group_centroid(g1),
        stats.group_centroid(g2),
        tuple(trace),
    )


def make_partition(ds: Dataset, g1, g2, eps: float = DEFAULT_EPS) -> ClassPartition:
    """A :class:`ClassPartition` for given groups, scored on ``ds``."""
    return _make_partition(ClassStats(ds), sorted(int(c) for c in g1), sorted(int(c) for c in g2), eps)


def _improves(new: float, cur: float) -> bool:
    return new - cur > REL_TOL * max(1.0, abs(cur))


def sffs_bipartition(
    ds: Dataset, classes: Iterable[int] | None = None, eps: float = DEFAULT_EPS, stats: ClassStats | None = None
) -> ClassPartition:
    """Split ``classes`` in two by sequential forward floating selection.

    Starting from an empty positive group, the class whose move to the positive
    side gives the largest score is included; then the positive class whose
    removal helps most is excluded for as long as that strictly improves the
    score. Inclusion is only kept when it strictly improves the score (the
    first one from the empty start is always taken), so the accepted scores
    form a strictly increasing sequence and the search stops at a partition
    no single-class move can improve. Ties go to the lowest class index.
    """
    stats = stats or ClassStats(ds)
    pool = sorted(set(range(ds.n_classes) if classes is None else (int(c) for c in classes)))
    if len(pool) < 2:
        raise ValueError("sffs_bipartition needs at least 2 classes")

    g1: list[int] = []
    g2: list[int] = list(pool)
    current = -math.inf
    trace: list[float] = []

    while True:
        # inclusion
        if len(g2) < 2:
            break
        best_c, best_s = None, -math.inf
        for c in g2:
            s = stats.score(g1 + [c], [x for x in g2 if x != c], eps)
            if s > best_s:
                best_c, best_s = c, s
        if not g1 or _improves(best_s, current):
            g1 = sorted(g1 + [best_c])
            g2.remove(best_c)
            current = best_s
            trace.append(current)
        else:
            break

        # conditional exclusion
        while len(g1) >= 2:
            best_c, best_s = None, -math.inf
            for c in g1:
                s = stats.score([x for x in g1 if x != c], g2 + [c], eps)
                if s > best_s:
                    best_c, best_s = c, s
            if not _improves(best_s, current):
                break
            g1.remove(best_c)
            g2 = sorted(g2 + [best_c])
            current = best_s
            trace.append(current)

    return _make_partition(stats, g1, g2, eps, trace)


def exhaustive_bipartition(
    ds: Dataset, classes: Iterable[int] | None = None, eps: float = DEFAULT_EPS, stats: ClassStats | None = None
) -> ClassPartition:
    """Best bipartition by enumerating all 2**(n-1) - 1 splits of ``classes``.

    ``g1`` always holds the smallest class; among equal scores the
    lexicographically smallest ``g1`` wins.
    """
    stats = stats or ClassStats(ds)
    pool = sorted(set(range(ds.n_classes) if classes is None else (int(c) for c in classes)))
    n = len(pool)
    if n < 2:
        raise ValueError("exhaustive_bipartition needs at least 2 classes")
    if n > MAX_EXHAUSTIVE_CLASSES:
        raise ValueError(f"too many classes for enumeration ({n} > {MAX_EXHAUSTIVE_CLASSES})")

    first, rest = pool[0], pool[1:]
    best = None
    for r in range(0, n - 1):
        for extra in itertools.combinations(rest, r):
            g1 = (first,) + extra
            g2 = [c for c in rest if c not in extra]
            s = stats.score(g1, g2, eps)
            if best is None or s > best[0] or (s == best[0] and g1 < best[1]):
                best = (s, g1, g2)
    return _make_partition(stats, best[1], best[2], eps)


def single_move_scores(ds: Dataset, part: ClassPartition, eps: float = DEFAULT_EPS) -> list[tuple[int, float]]:
    """Score after each single-class move that keeps both groups nonempty."""
    stats = ClassStats(ds)
    out = []
    for c in sorted(part.classes):
        if c in part.g1:
            if len(part.g1) < 2:
                continue
            g1, g2 = part.g1 - {c}, part.g2 | {c}
        else:
            if len(part.g2) < 2:
                continue
            g1, g2 = part.g1 | {c}, part.g2 - {c}
        out.append((c, stats.score(g1, g2, eps)))
    return out


def is_local_optimum(ds: Dataset, part: ClassPartition, eps: float = DEFAULT_EPS) -> bool:
    return not any(_improves(s, part.score) for _, s in single_move_scores(ds, part, eps))
