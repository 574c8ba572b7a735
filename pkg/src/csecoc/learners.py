"""Base learners: k-nearest-neighbour regressor/classifier and RBF kernel ridge."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

FAMILIES = ("knn_regressor", "knn_classifier", "kernel_ridge")
REGRESSORS = ("knn_regressor", "kernel_ridge")


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerSpec:
    family: str = "knn_regressor"
    k: int = 5
    gamma: float | None = None  # None -> 1 / n_features at fit time
    ridge_lambda: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise LearnerError(f"unknown learner family {self.family!r}")
        if self.k < 1:
            raise LearnerError("k must be >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise LearnerError("gamma must be > 0")
        if not self.ridge_lambda >= 0:
            raise LearnerError("ridge_lambda must be >= 0")

    @property
    def is_regressor(self) -> bool:
        return self.family in REGRESSORS

    def as_dict(self) -> dict:
        return {"family": self.family, "k": self.k, "gamma": self.gamma, "ridge_lambda": self.ridge_lambda}


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(len(a), len(b)) squared Euclidean distances by explicit differencing.

    Accumulates one feature at a time: exact differences (no dot-product
    expansion) and a fixed summation order, so tie-breaking is reproducible.
    """
    out = np.zeros((a.shape[0], b.shape[0]))
    for j in range(a.shape[1]):
        out += (a[:, j, None] - b[None, :, j]) ** 2
    return out


def _fingerprint(x: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(x).tobytes())
    h.update(np.ascontiguousarray(y).tobytes())
    return h.hexdigest()[:16]


class TrainedLearner:
    """Fitted state of one base learner. Immutable after :func:`fit`."""

    def __init__(self, spec: LearnerSpec, x: np.ndarray, y: np.ndarray, gamma: float, alpha=None):
        self.spec = spec
        self.x = x
        self.y = y
        self.gamma = gamma
        self.alpha = alpha
        self.fingerprint = _fingerprint(x, y)
        for a in (self.x, self.y, self.alpha):
            if a is not None:
                a.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def predict(self, q) -> np.ndarray:
        """Predict a batch ``(n, Lf)`` of queries; a 1-D query returns a length-1 array."""
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        if q.shape[1] != self.n_features:
            raise LearnerError(f"query has {q.shape[1]} features, expected {self.n_features}")
        fam = self.spec.family
        if fam == "kernel_ridge":
            return np.exp(-self.gamma * squared_distances(q, self.x)) @ self.alpha
        k = min(self.spec.k, self.x.shape[0])
        d = squared_distances(q, self.x)
        # stable sort: equal distances keep the lower training index first
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
        targets = self.y[nn]
        if fam == "knn_regressor":
            return targets.mean(axis=1)
        votes = np.sum(targets, axis=1)
        return np.where(votes >= 0, 1.0, -1.0)


def fit(spec: LearnerSpec, x, y) -> TrainedLearner:
    x = np.array(x, dtype=np.float64)
    y = np.array(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise LearnerError("x must be a non-empty 2-D array")
    if y.shape != (x.shape[0],):
        raise LearnerError("y length does not match x rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise LearnerError("non-finite training data")
    if spec.family == "knn_classifier" and not np.all(np.isin(y, (-1.0, 1.0))):
        raise LearnerError("knn_classifier labels must be -1 or +1")

    gamma = spec.gamma if spec.gamma is not None else 1.0 / x.shape[1]
    alpha = None
    if spec.family == "kernel_ridge":
        kmat = np.exp(-gamma * squared_distances(x, x))
        kmat[np.diag_indices_from(kmat)] += spec.ridge_lambda
        try:
            alpha = np.linalg.solve(kmat, y)
        except np.linalg.LinAlgError as exc:
            raise LearnerError(
                f"kernel system is singular (ridge_lambda={spec.ridge_lambda}); use ridge_lambda > 0"
            ) from exc
        if not np.all(np.isfinite(alpha)):
            raise LearnerError("kernel system is numerically singular; use ridge_lambda > 0")
    return TrainedLearner(spec, x, y, gamma, alpha)


def predict(model: TrainedLearner, q) -> float:
    """Prediction for a single query vector."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise LearnerError("predict takes one query vector; use TrainedLearner.predict for batches")
    return float(model.predict(q)[0])
