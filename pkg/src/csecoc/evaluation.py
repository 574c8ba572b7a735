"""Class-averaged metrics, repeated stratified cross-validation and benchmark reports."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .coding import TREE_KINDS, build_matrix, ensemble_size
from .data import Dataset, FoldPlan, Standardizer, stratified_folds
from .learners import LearnerSpec
from .partition import DEFAULT_EPS
from .pipeline import train_ecoc

log = logging.getLogger(__name__)

METRIC_KEYS = ("accuracy", "precision", "recall", "fscore", "plain_accuracy")
LEARNER_CHOICES = ("knn", "kernel")


def metrics(labels, preds, nc: int, beta: float = 1.0) -> dict:
    """One-vs-rest class-averaged accuracy, precision, recall and F-score.

    Each class i in turn is the positive class; the per-class binary scores
    are averaged over all ``nc`` classes. A class never predicted contributes
    precision 0, a class absent from ``labels`` contributes recall 0; both
    are listed under ``flags``. ``plain_accuracy`` is the fraction of exact
    matches.
    """
    y = np.asarray(labels, dtype=np.int64)
    p = np.asarray(preds, dtype=np.int64)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError("labels and preds must be 1-D sequences of equal length")
    if y.size == 0:
        raise ValueError("empty input")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    n = y.size
    b2 = beta * beta
    acc, prec, rec, fs = [], [], [], []
    flags = []
    for i in range(nc):
        tp = int(np.sum((y == i) & (p == i)))
        fp = int(np.sum((y != i) & (p == i)))
        fn = int(np.sum((y == i) & (p != i)))
        tn = n - tp - fp - fn
        acc.append((tp + tn) / n)
        if tp + fp == 0:
            pr = 0.0
            flags.append(f"class {i}: no predictions")
        else:
            pr = tp / (tp + fp)
        if tp + fn == 0:
            rc = 0.0
            flags.append(f"class {i}: no true samples")
        else:
            rc = tp / (tp + fn)
        denom = b2 * pr + rc
        prec.append(pr)
        rec.append(rc)
        fs.append((b2 + 1.0) * pr * rc / denom if denom > 0 else 0.0)
    return {
        "accuracy": float(np.mean(acc)),
        "precision": float(np.mean(prec)),
        "recall": float(np.mean(rec)),
        "fscore": float(np.mean(fs)),
        "plain_accuracy": float(np.mean(y == p)),
        "flags": flags,
    }


def learner_for(method: str, learner: str, k: int = 5, gamma=None, ridge_lambda: float = 1.0) -> LearnerSpec:
    """Base learner used by ``method`` under a learner choice.

    ``knn``: soft codes get the KNN regressor, hard codes the KNN classifier.
    ``kernel``: every method gets RBF kernel ridge.
    """
    if learner == "knn":
        family = "knn_regressor" if method == "csecoc" else "knn_classifier"
    elif learner == "kernel":
        family = "kernel_ridge"
    else:
        raise ValueError(f"unknown learner {learner!r}")
    return LearnerSpec(family, k=k, gamma=gamma, ridge_lambda=ridge_lambda)


@dataclass(frozen=True)
class CVOptions:
    eps: float = DEFAULT_EPS
    standardize: bool = False
    leaky_matrix: bool = False
    target_mode: str = "coverage"
    matrix_seed: int = 42
    candidates: int = 1000


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    if a.size == 1:
        return float(a[0]), 0.0
    return float(a.mean()), float(a.std(ddof=1))


def run_cv(ds: Dataset, method: str, spec: LearnerSpec, plan: FoldPlan, options: CVOptions = CVOptions()) -> dict:
    """Cross-validate one (dataset, method, learner) cell over every split of ``plan``.

    Tree matrices are rebuilt from each training fold unless
    ``options.leaky_matrix`` is set, in which case one matrix is built from
    the whole dataset. Standardization is always fitted on the training fold.
    """
    if plan.assignments.shape[1] != ds.n_samples:
        raise ValueError("fold plan does not match dataset size")

    shared = None
    if options.leaky_matrix or method not in TREE_KINDS:
        full = ds
        if options.standardize and method in TREE_KINDS:
            full = ds.with_features(Standardizer.fit(ds.features).transform(ds.features))
        shared = build_matrix(method, full, options.eps, options.matrix_seed, options.candidates)

    splits = []
    for r, f, train_idx, test_idx in plan.splits():
        train = ds.subset(train_idx)
        st = None
        if options.standardize:
            st = Standardizer.fit(train.features)
            train = train.with_features(st.transform(train.features))
        matrix = shared if shared is not None else build_matrix(method, train, options.eps, options.matrix_seed, options.candidates)
        model = train_ecoc(train, matrix, spec, target_mode=options.target_mode, standardizer=st)
        preds = model.predict(ds.features[test_idx])
        mt = metrics(ds.labels[test_idx], preds, ds.n_classes)
        splits.append({"repeat": r, "fold": f, **{key: mt[key] for key in METRIC_KEYS}, "flags": mt["flags"]})

    splits.sort(key=lambda s: (s["repeat"], s["fold"]))
    summary = {}
    for key in METRIC_KEYS:
        mean, std = _mean_std([s[key] for s in splits])
        summary[key] = {"mean": mean, "std": std}
    return {
        "dataset": ds.name,
        "method": method,
        "learner": spec.as_dict(),
        "ensemble_size": ensemble_size(method, ds.n_classes),
        "n_splits": len(splits),
        "summary": summary,
        "splits": splits,
    }


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def row(self, dataset: str, method: str, learner: str | None = None) -> dict:
        for r in self.rows:
            if r["dataset"] == dataset and r["method"] == method and (learner is None or r["learner_choice"] == learner):
                return r
        raise KeyError((dataset, method, learner))

    def to_json(self) -> str:
        payload = {
            "metadata": self.metadata,
            "rows": {f"{r['dataset']}/{r['method']}/{r['learner_choice']}": r for r in self.rows},
            "failures": self.failures,
            "best": best_cells(self.rows),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        return format_table(self.rows, self.failures)


def best_cells(rows) -> dict:
    """Per (dataset, learner, metric): the method with the highest mean."""
    best: dict = {}
    for r in rows:
        for key in ("accuracy", "fscore", "plain_accuracy"):
            slot = f"{r['dataset']}/{r['learner_choice']}/{key}"
            mean = r["summary"][key]["mean"]
            if slot not in best or mean > best[slot][1]:
                best[slot] = (r["method"], mean)
    return {k: v[0] for k, v in sorted(best.items())}


def format_table(rows, failures=()) -> str:
    if not rows and not failures:
        return "(no results)\n"
    best = best_cells(rows)
    methods = list(dict.fromkeys(r["method"] for r in rows))
    lines = []
    for learner in dict.fromkeys(r["learner_choice"] for r in rows):
        lines.append(f"learner: {learner}")
        header = f"{'metric':<15}{'dataset':<14}" + "".join(f"{m:>16}" for m in methods)
        lines.append(header)
        lines.append("-" * len(header))
        datasets = list(dict.fromkeys(r["dataset"] for r in rows if r["learner_choice"] == learner))
        cells = {(r["dataset"], r["method"]): r for r in rows if r["learner_choice"] == learner}
        for key in ("plain_accuracy", "accuracy", "fscore"):
            for ds in datasets:
                parts = []
                for m in methods:
                    r = cells.get((ds, m))
                    if r is None:
                        parts.append(f"{'--':>16}")
                        continue
                    s = r["summary"][key]
                    mark = "*" if best.get(f"{ds}/{learner}/{key}") == m else " "
                    parts.append(f"{100 * s['mean']:>9.1f}±{100 * s['std']:<4.2f}{mark}")
                lines.append(f"{key:<15}{ds:<14}" + "".join(parts))
        sizes = {m: r["ensemble_size"] for (d, m), r in cells.items() if d == datasets[0]} if datasets else {}
        lines.append("ensemble size (" + (datasets[0] if datasets else "-") + "): " + ", ".join(f"{m}={sizes[m]}" for m in methods if m in sizes))
        lines.append("")
    for fail in failures:
        lines.append(f"FAILED {fail['dataset']}/{fail['method']}/{fail['learner_choice']}: {fail['error']}")
    return "\n".join(lines).rstrip() + "\n"


def _run_cell(task) -> dict:
    ds, method, learner_choice, spec, plan, options = task
    t0 = time.perf_counter()
    try:
        with threadpool_limits(limits=1):
            row = run_cv(ds, method, spec, plan, options)
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the benchmark
        return {"failed": True, "dataset": ds.name, "method": method, "learner_choice": learner_choice, "error": f"{type(exc).__name__}: {exc}"}
    row["learner_choice"] = learner_choice
    row["elapsed_s"] = time.perf_counter() - t0
    return row


def benchmark(
    datasets,
    methods,
    learners=("knn",),
    seed: int = 42,
    k: int = 10,
    repeats: int = 10,
    options: CVOptions | None = None,
    workers: int = 1,
    learner_params: dict | None = None,
    metadata: dict | None = None,
) -> EvalReport:
    """Cross product of datasets x methods x learner choices.

    Rows come back in task order whatever ``workers`` is; a failing cell is
    recorded under ``failures`` and the run continues.
    """
    options = options or CVOptions(matrix_seed=seed)
    learner_params = learner_params or {}
    tasks = []
    for ds in datasets:
        plan = stratified_folds(ds, k, repeats, seed)
        for learner in learners:
            for method in methods:
                spec = learner_for(method, learner, **learner_params)
                tasks.append((ds, method, learner, spec, plan, options))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    report = EvalReport(metadata=dict(metadata or {}))
    report.metadata.setdefault("seed", seed)
    report.metadata.setdefault("folds", k)
    report.metadata.setdefault("repeats", repeats)
    report.metadata.setdefault("options", asdict(options))
    report.metadata.setdefault("std", "sample (ddof=1) over repeats x folds split scores")
    report.metadata.setdefault("fold_generator", "numpy.PCG64(SeedSequence([seed, repeat, class])), round-robin deal")
    for res in results:
        if res.get("failed"):
            report.failures.append({k: res[k] for k in ("dataset", "method", "learner_choice", "error")})
            continue
        log.info("%s/%s/%s: %.1fs", res["dataset"], res["method"], res["learner_choice"], res.pop("elapsed_s"))
        report.rows.append(res)
    return report


def write_report(report: EvalReport, json_path=None, text_path=None) -> None:
    if json_path:
        with open(json_path, "w") as fh:
            fh.write(report.to_json())
    if text_path:
        with open(text_path, "w") as fh:
            fh.write(report.to_text())

