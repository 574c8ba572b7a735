"""Per-column training and least-loss decoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coding import CodingMatrix
from .data import Dataset, Standardizer
from .learners import LearnerSpec, fit

DECODINGS = ("euclidean", "hamming_ternary")
TARGET_MODES = ("coverage", "sign")


class PipelineError(ValueError):
    pass


def column_training_set(ds: Dataset, m: CodingMatrix, col: int, target_mode: str = "coverage"):
    """Samples of classes with a nonzero entry in column ``col`` and their targets.

    Targets are the matrix entries themselves, or their signs with
    ``target_mode="sign"``.
    """
    if not 0 <= col < m.n_columns:
        raise IndexError(f"column {col} out of range")
    if target_mode not in TARGET_MODES:
        raise PipelineError(f"unknown target mode {target_mode!r}")
    entries = m.values[:, col][ds.labels]
    keep = entries != 0
    y = entries[keep]
    if target_mode == "sign":
        y = np.sign(y)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise PipelineError(f"degenerate column {col}: training targets have a single sign")
    return ds.features[keep], y


def default_decoding(spec: LearnerSpec) -> str:
    return "euclidean" if spec.is_regressor else "hamming_ternary"


@dataclass(frozen=True)
class EcocModel:
    matrix: CodingMatrix
    learners: tuple
    decoding: str
    spec: LearnerSpec | None = None
    standardizer: Standardizer | None = None
    target_mode: str = "coverage"

    def outputs(self, x) -> np.ndarray:
        """Raw learner outputs, shape ``(n, n_columns)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.standardizer is not None:
            x = self.standardizer.transform(x)
        return np.column_stack([lrn.predict(x) for lrn in self.learners])

    def predict(self, x) -> np.ndarray:
        return decode_batch(self.outputs(x), self.matrix, self.decoding)


def train_ecoc(
    ds: Dataset,
    m: CodingMatrix,
    spec: LearnerSpec,
    decoding: str | None = None,
    target_mode: str = "coverage",
    standardizer: Standardizer | None = None,
    fitter: Callable | None = None,
) -> EcocModel:
    """Fit one learner per column of ``m``.

    ``ds`` must already be in the feature space the learners see; pass the
    ``standardizer`` that produced it so :meth:`EcocModel.predict` applies it
    to raw queries. ``fitter(x, y, col)`` replaces the learner family, e.g.
    with an oracle.
    """
    decoding = decoding or default_decoding(spec)
    if decoding not in DECODINGS:
        raise PipelineError(f"unknown decoding {decoding!r}")
    if m.n_classes != ds.n_classes:
        raise PipelineError(f"matrix has {m.n_classes} rows but dataset has {ds.n_classes} classes")
    if decoding == "hamming_ternary" and (spec.is_regressor or m.is_soft):
        raise PipelineError("hamming_ternary decoding needs a classifier and a hard matrix")

    learners = []
    for col in range(m.n_columns):
        x, y = column_training_set(ds, m, col, target_mode)
        if fitter is not None:
            learners.append(fitter(x, y, col))
            continue
        if not spec.is_regressor:
            y = np.sign(y)
        learners.append(fit(spec, x, y))
    return EcocModel(m, tuple(learners), decoding, spec, standardizer, target_mode)


def decode_batch(outputs, m: CodingMatrix, rule: str = "euclidean") -> np.ndarray:
    out = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    if out.shape[1] != m.n_columns:
        raise PipelineError(f"expected {m.n_columns} outputs, got {out.shape[1]}")
    if not np.all(np.isfinite(out)):
        raise PipelineError("non-finite learner outputs")
    rows = m.values
    if rule == "euclidean":
        loss = np.zeros((out.shape[0], rows.shape[0]))
        for j in range(rows.shape[1]):
            loss += (out[:, j, None] - rows[None, :, j]) ** 2
    elif rule == "hamming_ternary":
        loss = np.sum((1.0 - np.sign(out)[:, None, :] * rows[None, :, :]) / 2.0, axis=-1)
    else:
        raise PipelineError(f"unknown decoding {rule!r}")
    # argmin returns the first minimum, i.e. the lowest class index on ties
    return np.argmin(loss, axis=1)


def decode(outputs, m: CodingMatrix, rule: str = "euclidean") -> int:
    return int(decode_batch(np.asarray(outputs, dtype=np.float64)[None, :], m, rule)[0])


def predict(model: EcocModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise PipelineError("predict takes a single sample")
    return int(model.predict(x)[0])
