"""Coding matrices: soft centroid-coverage codes, hard hierarchical codes and baselines."""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .partition import DEFAULT_EPS, ClassPartition, ClassStats, sffs_bipartition

SOFT_KINDS = ("csecoc",)
TREE_KINDS = ("csecoc", "decoc_like")
RANDOM_KINDS = ("dense_random", "sparse_random")
BASELINE_KINDS = ("ova", "ovo") + RANDOM_KINDS
ALL_KINDS = TREE_KINDS + BASELINE_KINDS

DEFAULT_CANDIDATES = 1000
# draws allowed per column before a candidate matrix is abandoned
COLUMN_RETRY_BUDGET = 10_000
SPARSE_PROBS = (0.25, 0.5, 0.25)


class CodingError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnMeta:
    g1: tuple
    g2: tuple
    score: float | None = None


@dataclass(frozen=True)
class CodingMatrix:
    values: np.ndarray
    kind: str
    class_names: tuple
    column_meta: tuple = field(default=())

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise CodingError("coding matrix must be 2-D")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        object.__setattr__(self, "column_meta", tuple(self.column_meta))

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def is_soft(self) -> bool:
        return self.kind in SOFT_KINDS


def coverage(ds: Dataset, part: ClassPartition) -> np.ndarray:
    """Signed fraction of each class's samples lying nearer its own group centroid.

    Classes in ``g1`` get ``+count(d1 <= d2) / n``, classes in ``g2`` get
    ``-count(d1 > d2) / n``; classes outside the partition get 0.
    """
    d1 = np.sqrt(np.sum((ds.features - part.centroid1) ** 2, axis=1))
    d2 = np.sqrt(np.sum((ds.features - part.centroid2) ** 2, axis=1))
    near1 = d1 <= d2
    counts = ds.class_counts
    out = np.zeros(ds.n_classes)
    for c in part.g1:
        out[c] = np.count_nonzero(near1[ds.labels == c]) / counts[c]
    for c in part.g2:
        out[c] = -np.count_nonzero(~near1[ds.labels == c]) / counts[c]
    return out


def _build_tree(ds: Dataset, eps: float, soft: bool) -> tuple[np.ndarray, list[ColumnMeta], list[ClassPartition]]:
    stats = ClassStats(ds)
    columns: list[np.ndarray] = []
    meta: list[ColumnMeta] = []
    parts: list[ClassPartition] = []

    def split(group):
        part = sffs_bipartition(ds, group, eps, stats=stats)
        if soft:
            col = coverage(ds, part)
        else:
            col = np.zeros(ds.n_classes)
            col[list(part.g1)] = 1.0
            col[list(part.g2)] = -1.0
        columns.append(col)
        meta.append(ColumnMeta(tuple(sorted(part.g1)), tuple(sorted(part.g2)), part.score))
        parts.append(part)
        # depth first, positive side first
        for side in (part.g1, part.g2):
            if len(side) > 1:
                split(sorted(side))

    split(list(range(ds.n_classes)))
    return np.column_stack(columns), meta, parts


def build_csecoc(ds: Dataset, eps: float = DEFAULT_EPS) -> CodingMatrix:
    """Soft coding matrix from recursive floating-search splits, one column per split."""
    if ds.n_classes < 2:
        raise CodingError("need at least 2 classes")
    values, meta, _ = _build_tree(ds, eps, soft=True)
    return CodingMatrix(values, "csecoc", ds.class_names, meta)


def build_decoc_like(ds: Dataset, eps: float = DEFAULT_EPS) -> CodingMatrix:
    """Same split tree as :func:`build_csecoc` with hard +1/-1/0 entries."""
    if ds.n_classes < 2:
        raise CodingError("need at least 2 classes")
    values, meta, _ = _build_tree(ds, eps, soft=False)
    return CodingMatrix(values, "decoc_like", ds.class_names, meta)


def random_column_count(kind: str, nc: int) -> int:
    factor = {"dense_random": 10, "sparse_random": 15}[kind]
    return int(math.ceil(factor * math.log2(nc)))


def _pattern_pool_size(kind: str, nc: int) -> int:
    # distinct valid columns up to sign flip
    if kind == "dense_random":
        return 2 ** (nc - 1) - 1
    return (3**nc - 2 ** (nc + 1) + 1) // 2


def _canonical(col: np.ndarray) -> bytes:
    first = col[np.flatnonzero(col)[0]]
    return (col * first).astype(np.int8).tobytes()


def row_distance_matrix(values: np.ndarray) -> np.ndarray:
    """Pairwise row distances: 1 per opposite entry, 1/2 per zero-vs-nonzero entry."""
    a = values[:, None, :]
    b = values[None, :, :]
    return np.sum(np.abs(a - b), axis=-1) / 2.0


def _rows_separable(values: np.ndarray) -> bool:
    # every row must differ from every other row somewhere on its own support
    nz = values != 0
    for r in range(values.shape[0]):
        differs = (values != values[r]) & nz[r]
        others = np.delete(differs.any(axis=1), r)
        if not others.all():
            return False
    return True


def _random_candidate(kind: str, nc: int, ncols: int, rng: np.random.Generator) -> np.ndarray | None:
    pool = _pattern_pool_size(kind, nc)
    used: set[bytes] = set()
    cols = []
    for _ in range(ncols):
        if len(used) >= pool:
            used.clear()
        for _attempt in range(COLUMN_RETRY_BUDGET):
            if kind == "dense_random":
                col = rng.choice(np.array([-1.0, 1.0]), size=nc)
            else:
                col = rng.choice(np.array([-1.0, 0.0, 1.0]), size=nc, p=SPARSE_PROBS)
            if not (np.any(col > 0) and np.any(col < 0)):
                continue
            key = _canonical(col)
            if key in used:
                continue
            used.add(key)
            cols.append(col)
            break
        else:
            return None
    m = np.column_stack(cols)
    if len({r.tobytes() for r in m}) < nc:
        return None
    if kind == "sparse_random" and not _rows_separable(m):
        return None
    return m


def build_baseline(
    kind: str, nc: int, seed: int = 42, candidates: int = DEFAULT_CANDIDATES, class_names=None
) -> CodingMatrix:
    """Problem-independent coding matrices.

    Random kinds keep the best of ``candidates`` valid draws by minimum
    pairwise row distance (zero vs nonzero counts 1/2); the first best wins
    ties. Within a matrix, columns are distinct up to sign until every valid
    pattern has been used once.
    """
    if nc < 2:
        raise CodingError("need at least 2 classes")
    names = tuple(class_names) if class_names is not None else tuple(str(i) for i in range(nc))
    if kind == "ova":
        values = -np.ones((nc, nc))
        np.fill_diagonal(values, 1.0)
        meta = [ColumnMeta((j,), tuple(i for i in range(nc) if i != j)) for j in range(nc)]
        return CodingMatrix(values, kind, names, meta)
    if kind == "ovo":
        pairs = [(i, j) for i in range(nc) for j in range(i + 1, nc)]
        values = np.zeros((nc, len(pairs)))
        for col, (i, j) in enumerate(pairs):
            values[i, col] = 1.0
            values[j, col] = -1.0
        return CodingMatrix(values, kind, names, [ColumnMeta((i,), (j,)) for i, j in pairs])
    if kind not in RANDOM_KINDS:
        raise CodingError(f"unknown baseline kind {kind!r}")
    if candidates < 1:
        raise CodingError("candidates must be >= 1")

    return CodingMatrix(_select_random(kind, nc, seed, candidates), kind, names)


@functools.lru_cache(maxsize=64)
def _select_random(kind: str, nc: int, seed: int, candidates: int) -> np.ndarray:
    ncols = random_column_count(kind, nc)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, nc, RANDOM_KINDS.index(kind)])))
    best, best_d = None, -1.0
    for _ in range(candidates):
        m = _random_candidate(kind, nc, ncols, rng)
        if m is None:
            continue
        d = row_distance_matrix(m)
        md = float(d[~np.eye(nc, dtype=bool)].min())
        if md > best_d:
            best, best_d = m, md
    if best is None:
        raise CodingError(f"no valid {kind} matrix in {candidates} candidates")
    best.setflags(write=False)
    return best


def build_matrix(kind: str, ds: Dataset, eps: float = DEFAULT_EPS, seed: int = 42, candidates: int = DEFAULT_CANDIDATES) -> CodingMatrix:
    if kind == "csecoc":
        return build_csecoc(ds, eps)
    if kind == "decoc_like":
        return build_decoc_like(ds, eps)
    return build_baseline(kind, ds.n_classes, seed, candidates, ds.class_names)


def ensemble_size(kind: str, nc: int) -> int:
    if kind in TREE_KINDS:
        return nc - 1
    if kind == "ova":
        return nc
    if kind == "ovo":
        return nc * (nc - 1) // 2
    return random_column_count(kind, nc)


@dataclass
class ValidityReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_matrix(m: CodingMatrix, class_counts=None) -> ValidityReport:
    """Check every structural invariant of ``m``; never raises, never mutates.

    A tree-kind entry of exactly 0 for a class inside its column's partition is
    a zero-coverage warning, not a violation. With ``class_counts`` the soft
    entries are also checked to be whole sample counts.
    """
    rep = ValidityReport()
    v = np.asarray(m.values)
    nc, ncols = v.shape

    if not np.all(np.isfinite(v)):
        rep.violations.append("non-finite entries")
        return rep
    if np.any(np.abs(v) > 1.0):
        rep.violations.append("entries outside [-1, 1]")
    if len(m.class_names) != nc:
        rep.violations.append("class_names length does not match rows")
    if m.kind not in ALL_KINDS:
        rep.violations.append(f"unknown kind {m.kind!r}")
    if not m.is_soft and not np.all(np.isin(v, (-1.0, 0.0, 1.0))):
        rep.violations.append("hard matrix has non-ternary entries")

    tree = m.kind in TREE_KINDS
    for j in range(ncols):
        col = v[:, j]
        if not np.any(col > 0):
            if not (tree and _zero_coverage_only(m, j, positive=True)):
                rep.violations.append(f"column {j} lacks positive entry")
        if not np.any(col < 0):
            if not (tree and _zero_coverage_only(m, j, positive=False)):
                rep.violations.append(f"column {j} lacks negative entry")

    rows = {}
    for r in range(nc):
        key = v[r].tobytes()
        if key in rows:
            rep.violations.append(f"duplicate rows {rows[key]} and {r}")
        else:
            rows[key] = r

    signs = np.sign(v)
    random_kind = m.kind in RANDOM_KINDS
    check_cols = True
    if random_kind:
        check_cols = ncols <= _pattern_pool_size(m.kind, nc)
    if check_cols:
        seen = {}
        for j in range(ncols):
            s = signs[:, j]
            if not s.any():
                continue
            for key, label in ((s.tobytes(), "duplicate"), ((-s).tobytes(), "complement")):
                if key in seen:
                    rep.violations.append(f"column {j} is a {label} of column {seen[key]}")
                    break
            seen.setdefault(s.tobytes(), j)

    if tree:
        if ncols != nc - 1:
            rep.violations.append(f"expected {nc - 1} columns, found {ncols}")
        if len(m.column_meta) != ncols:
            rep.violations.append("column_meta missing for tree matrix")
        else:
            for j, cm in enumerate(m.column_meta):
                expect = np.zeros(nc)
                expect[list(cm.g1)] = 1
                expect[list(cm.g2)] = -1
                for r in range(nc):
                    if signs[r, j] == expect[r]:
                        continue
                    if signs[r, j] == 0 and expect[r] != 0:
                        rep.warnings.append(f"zero-coverage: class {m.class_names[r]} in column {j}")
                    else:
                        rep.violations.append(f"column {j} sign of class {r} disagrees with its partition")
            _check_tree(m, rep)

    if class_counts is not None and m.is_soft:
        counts = np.asarray(class_counts, dtype=np.float64)
        # exact: the recovered whole count must reproduce the entry bit for bit
        hits = np.round(np.abs(v) * counts[:, None])
        if not np.array_equal(hits / counts[:, None], np.abs(v)):
            rep.violations.append("|entry| * class count is not an integer")
    return rep


def _zero_coverage_only(m: CodingMatrix, j: int, positive: bool) -> bool:
    if len(m.column_meta) <= j:
        return False
    side = m.column_meta[j].g1 if positive else m.column_meta[j].g2
    return bool(side) and all(m.values[c, j] == 0 for c in side)


def _check_tree(m: CodingMatrix, rep: ValidityReport) -> None:
    # replay depth-first order: each column's classes must be the pending node
    stack = [tuple(range(m.n_classes))]
    for j, cm in enumerate(m.column_meta):
        if not stack:
            rep.violations.append(f"column {j} has no parent node")
            return
        node = stack.pop()
        if tuple(sorted(cm.g1 + cm.g2)) != node:
            rep.violations.append(f"column {j} classes {sorted(cm.g1 + cm.g2)} != parent group {list(node)}")
            return
        for side in (cm.g2, cm.g1):
            if len(side) > 1:
                stack.append(tuple(sorted(side)))
    if stack:
        rep.violations.append("tree has unsplit groups")


def matrix_to_csv(m: CodingMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class"] + [f"H{j}" for j in range(m.n_columns)])
    for name, row in zip(m.class_names, m.values):
        # +0.0 folds negative zero
        w.writerow([name] + [f"{x + 0.0:.6f}" for x in row])
    return buf.getvalue()


def write_matrix_csv(m: CodingMatrix, path) -> None:
    Path(path).write_text(matrix_to_csv(m))


def read_matrix_csv(path, kind: str = "csecoc", column_meta=()) -> CodingMatrix:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["class"]:
        raise CodingError(f"{path}: missing header row")
    width = len(rows[0])
    names, values = [], []
    for r in rows[1:]:
        if not r:
            continue
        if len(r) != width:
            raise CodingError(f"{path}: ragged matrix row")
        names.append(r[0])
        values.append([float(t) for t in r[1:]])
    return CodingMatrix(np.array(values), kind, names, column_meta)
