import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csecoc import oracles
from csecoc.data import Dataset, leave_one_out, stratified_folds
from csecoc.evaluation import CVOptions, benchmark, learner_for, metrics, run_cv


def test_metrics_perfect():
    m = metrics([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert m["accuracy"] == m["fscore"] == m["plain_accuracy"] == 1.0
    assert m["flags"] == []


def test_metrics_hand_example():
    m = metrics([0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 2, 1], 3)
    assert m["accuracy"] == pytest.approx(8 / 9, abs=1e-15)
    assert m["fscore"] == pytest.approx((1 + 0.8 + 2 / 3) / 3, abs=1e-15)
    assert m["plain_accuracy"] == pytest.approx(5 / 6)


def test_metrics_beta_limit():
    labels, preds = [0, 0, 1, 1, 2, 2, 2], [0, 1, 1, 1, 2, 0, 2]
    m = metrics(labels, preds, 3, beta=1000.0)
    assert m["fscore"] == pytest.approx(m["recall"], abs=1e-3)


def test_metrics_flags_and_errors():
    m = metrics([0, 0], [0, 0], 2)
    assert "class 1: no predictions" in m["flags"]
    assert "class 1: no true samples" in m["flags"]
    with pytest.raises(ValueError):
        metrics([], [], 2)
    with pytest.raises(ValueError):
        metrics([0], [0, 1], 2)
    with pytest.raises(ValueError):
        metrics([0], [0], 2, beta=0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_metrics_match_confusion_oracle(seed):
    rng = np.random.default_rng(seed)
    nc = int(rng.integers(2, 7))
    n = int(rng.integers(1, 80))
    y, p = rng.integers(0, nc, n), rng.integers(0, nc, n)
    got = metrics(y, p, nc)
    ref = oracles.confusion_metrics(y, p, nc)
    for key, val in ref.items():
        assert abs(got[key] - val) <= 1e-12
    assert got["accuracy"] >= got["plain_accuracy"] - 1e-12
    perm = rng.permutation(n)
    again = metrics(y[perm], p[perm], nc)
    for key in ref:
        assert again[key] == pytest.approx(got[key], abs=1e-12)


def test_learner_for():
    assert learner_for("csecoc", "knn").family == "knn_regressor"
    assert learner_for("ova", "knn").family == "knn_classifier"
    assert learner_for("ovo", "kernel").family == "kernel_ridge"
    with pytest.raises(ValueError):
        learner_for("ova", "svm")


def toy(n=20):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(n, 2)) + np.repeat([[0, 0], [4, 0]], n // 2, axis=0)
    return Dataset(x, np.repeat([0, 1], n // 2), ("a", "b"), "toy")


def test_leave_one_out_shape():
    ds = toy()
    plan = leave_one_out(ds)
    row = run_cv(ds, "csecoc", learner_for("csecoc", "knn"), plan)
    assert row["n_splits"] == 20
    assert len(row["splits"]) == 20
    assert np.isfinite(row["summary"]["accuracy"]["std"])


def test_std_is_sample_std():
    ds = toy()
    plan = stratified_folds(ds, 2, 1, 0)
    assert len(list(plan.splits())) == 2
    row = run_cv(ds, "csecoc", learner_for("csecoc", "knn"), plan)
    vals = [s["accuracy"] for s in row["splits"]]
    assert row["summary"]["accuracy"]["mean"] == pytest.approx(np.mean(vals))
    assert row["summary"]["accuracy"]["std"] == pytest.approx(np.std(vals, ddof=1))


def test_run_cv_aggregation_reproduces_cells(iris):
    plan = stratified_folds(iris, 5, 2, 3)
    row = run_cv(iris, "csecoc", learner_for("csecoc", "knn"), plan, CVOptions(standardize=True))
    assert row["n_splits"] == 10
    assert [(s["repeat"], s["fold"]) for s in row["splits"]] == [(r, f) for r in range(2) for f in range(5)]
    for key in ("accuracy", "fscore", "plain_accuracy"):
        vals = np.array([s[key] for s in row["splits"]])
        assert row["summary"][key]["mean"] == float(vals.mean())
        assert row["summary"][key]["std"] == float(vals.std(ddof=1))
    assert row == run_cv(iris, "csecoc", learner_for("csecoc", "knn"), plan, CVOptions(standardize=True))


def test_leaky_and_per_fold_both_run(wine):
    plan = stratified_folds(wine, 3, 1, 0)
    spec = learner_for("csecoc", "knn")
    a = run_cv(wine, "csecoc", spec, plan, CVOptions(leaky_matrix=True))
    b = run_cv(wine, "csecoc", spec, plan, CVOptions(leaky_matrix=False))
    assert a["n_splits"] == b["n_splits"] == 3


def test_benchmark_grid_and_failures(iris):
    bad = Dataset(np.zeros((4, 1)), np.array([0, 0, 1, 1]), ("a", "b"), "tiny")
    with pytest.raises(Exception):
        benchmark([bad], ["ova"], k=3, repeats=1)
    rep = benchmark([iris], ["ova", "csecoc"], ["knn", "kernel"], k=3, repeats=1)
    assert len(rep.rows) == 4
    assert rep.row("iris", "csecoc", "kernel")["ensemble_size"] == 2
    payload = json.loads(rep.to_json())
    assert "iris/ova/knn" in payload["rows"]
    assert payload["best"]["iris/knn/accuracy"] in ("ova", "csecoc")
    text = rep.to_text()
    assert "*" in text and "ensemble size" in text


def test_benchmark_failed_cell_is_recorded(iris, monkeypatch):
    from csecoc import evaluation

    real = evaluation.run_cv

    def flaky(ds, method, *args, **kw):
        if method == "ovo":
            raise RuntimeError("boom")
        return real(ds, method, *args, **kw)

    monkeypatch.setattr(evaluation, "run_cv", flaky)
    rep = benchmark([iris], ["ova", "ovo"], k=3, repeats=1)
    assert [r["method"] for r in rep.rows] == ["ova"]
    assert rep.failures[0]["error"] == "RuntimeError: boom"
    assert "FAILED iris/ovo/knn" in rep.to_text()


def test_benchmark_empty_methods(iris):
    rep = benchmark([iris], [], k=3, repeats=1)
    assert rep.rows == [] and rep.failures == []
    assert rep.to_text() == "(no results)\n"


def test_benchmark_worker_count_independent(iris, wine):
    args = ([iris, wine], ["ova", "csecoc", "sparse_random"], ["knn"])
    one = benchmark(*args, k=3, repeats=2, workers=1, options=CVOptions(candidates=30))
    two = benchmark(*args, k=3, repeats=2, workers=2, options=CVOptions(candidates=30))
    assert one.to_json() == two.to_json()
    assert one.to_text() == two.to_text()
