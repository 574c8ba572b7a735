import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csecoc.coding import CodingMatrix, ColumnMeta, build_baseline, build_csecoc, build_matrix
from csecoc.data import Dataset
from csecoc.learners import LearnerSpec
from csecoc.pipeline import (
    PipelineError,
    column_training_set,
    decode,
    decode_batch,
    predict,
    train_ecoc,
)


class ConstantLearner:
    """Emits a fixed output for every query."""

    def __init__(self, value):
        self.value = value

    def predict(self, q):
        return np.full(np.atleast_2d(q).shape[0], self.value)


def fig3_like_matrix():
    values = np.array(
        [
            [0.73, 1.0, 0.0, 0.86, 0.0],
            [0.80, -1.0, 0.0, 0.0, 0.0],
            [0.90, 1.0, 0.0, -0.95, 0.0],
            [-1.0, 0.0, 1.0, 0.0, 0.77],
            [-0.91, 0.0, -1.0, 0.0, 0.0],
            [-0.88, 0.0, 1.0, 0.0, -1.0],
        ]
    )
    return CodingMatrix(values, "csecoc", tuple(f"C{i}" for i in range(6)))


def balanced(n_per_class, nc, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_per_class * nc, 2)) + np.repeat(np.arange(nc) * 5.0, n_per_class)[:, None]
    return Dataset(x, np.repeat(np.arange(nc), n_per_class), tuple(f"C{i}" for i in range(nc)))


def test_column_training_set_zero_exclusion():
    ds = balanced(100, 6)
    m = fig3_like_matrix()
    x, y = column_training_set(ds, m, 3)
    assert x.shape[0] == 200
    assert sorted(set(y.tolist())) == [-0.95, 0.86]
    _, y_sign = column_training_set(ds, m, 3, target_mode="sign")
    assert sorted(set(y_sign.tolist())) == [-1.0, 1.0]


def test_column_training_set_ova():
    ds = balanced(10, 3)
    m = build_baseline("ova", 3)
    x, y = column_training_set(ds, m, 1)
    assert x.shape[0] == 30
    assert np.array_equal(y, np.where(ds.labels == 1, 1.0, -1.0))


def test_degenerate_column():
    ds = balanced(5, 3)
    m = CodingMatrix(np.array([[1.0], [0.0], [0.5]]), "csecoc", ("a", "b", "c"), [ColumnMeta((0, 2), (1,))])
    with pytest.raises(PipelineError, match="degenerate"):
        column_training_set(ds, m, 0)


def test_train_sizes(iris, wine):
    assert len(train_ecoc(iris, build_csecoc(iris), LearnerSpec()).learners) == 2
    ovo = build_baseline("ovo", 3, class_names=wine.class_names)
    assert len(train_ecoc(wine, ovo, LearnerSpec("knn_classifier")).learners) == 3


def test_decoding_compatibility(iris):
    with pytest.raises(PipelineError):
        train_ecoc(iris, build_csecoc(iris), LearnerSpec("knn_classifier"), decoding="hamming_ternary")
    with pytest.raises(PipelineError):
        train_ecoc(iris, build_baseline("ova", 3), LearnerSpec(), decoding="hamming_ternary")
    with pytest.raises(PipelineError):
        train_ecoc(iris, build_baseline("ova", 4), LearnerSpec("knn_classifier"))


def test_decode_examples():
    m = CodingMatrix(np.array([[1.0, -1.0], [-1.0, 1.0]]), "ova", ("a", "b"))
    assert decode([1.0, -1.0], m) == 0
    assert decode([-1.0, 1.0], m) == 1
    assert decode([0.9, -0.8], m) == 0
    assert decode([0.0, 0.0], m) == 0
    assert decode([0.0, 0.0], m, "hamming_ternary") == 0
    with pytest.raises(PipelineError):
        decode([np.nan, 0.0], m)
    with pytest.raises(PipelineError):
        decode([1.0], m)


def test_hamming_zero_costs_half():
    m = CodingMatrix(np.array([[1.0, 0.0, 1.0], [1.0, 1.0, -1.0], [-1.0, -1.0, 0.0]]), "sparse_random", tuple("abc"))
    # losses: a = 0 + 1/2 + 1 = 1.5 ; b = 0 + 0 + 0 = 0 ; c = 1 + 1 + 1/2
    assert decode([1.0, 1.0, -1.0], m, "hamming_ternary") == 1
    assert decode([-1.0, 1.0, 1.0], m, "hamming_ternary") == 0


def test_two_class_midpoint_flip():
    m = CodingMatrix(np.array([[0.6], [-1.0]]), "csecoc", ("a", "b"), [ColumnMeta((0,), (1,))])
    mid = (0.6 - 1.0) / 2
    assert decode([mid + 1e-9], m) == 0
    assert decode([mid - 1e-9], m) == 1
    assert decode([mid], m) == 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), value=st.sampled_from([-1.0, 0.0, 1.0, 0.37]))
def test_constant_column_invariance(seed, value):
    rng = np.random.default_rng(seed)
    rows = rng.uniform(-1, 1, size=(5, 4))
    out = rng.uniform(-1.5, 1.5, size=(30, 4))
    m = CodingMatrix(rows, "csecoc", tuple("abcde"))
    m2 = CodingMatrix(np.column_stack([rows, np.full(5, value)]), "csecoc", tuple("abcde"))
    assert np.array_equal(decode_batch(out, m), decode_batch(np.column_stack([out, np.full(30, value)]), m2))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["ova", "dense_random"]))
def test_euclidean_matches_hamming_on_full_matrices(seed, kind):
    rng = np.random.default_rng(seed)
    m = build_baseline(kind, int(rng.integers(3, 7)), seed=seed % 100, candidates=20)
    out = rng.choice([-1.0, 1.0], size=(40, m.n_columns))
    assert np.array_equal(decode_batch(out, m, "euclidean"), decode_batch(out, m, "hamming_ternary"))


@pytest.mark.parametrize("kind", ["decoc_like", "ova", "ovo", "dense_random", "sparse_random"])
def test_perfect_learner_identity(wine, kind):
    m = build_matrix(kind, wine, candidates=50)
    model = train_ecoc(
        wine, m, LearnerSpec("knn_classifier"), fitter=lambda x, y, col: ColumnOracle(wine, m, col)
    )
    assert np.array_equal(model.predict(wine.features), wine.labels)


class ColumnOracle:
    """Looks up each query's true class and emits that class's code entry."""

    def __init__(self, ds, m, col):
        self.lookup = {row.tobytes(): m.values[lab, col] for row, lab in zip(ds.features, ds.labels)}

    def predict(self, q):
        return np.array([self.lookup[row.tobytes()] for row in np.atleast_2d(q)])


def test_csecoc_knn_training_accuracy(iris):
    model = train_ecoc(iris, build_csecoc(iris), LearnerSpec())
    assert np.mean(model.predict(iris.features) == iris.labels) >= 0.90
    assert predict(model, iris.features[0]) == model.predict(iris.features[:1])[0]
    with pytest.raises(PipelineError):
        predict(model, iris.features[:2])


def test_predict_applies_standardizer(wine):
    from csecoc.data import Standardizer

    st_ = Standardizer.fit(wine.features)
    z = wine.with_features(st_.transform(wine.features))
    model = train_ecoc(z, build_csecoc(z), LearnerSpec(), standardizer=st_)
    plain = train_ecoc(z, build_csecoc(z), LearnerSpec())
    assert np.array_equal(model.predict(wine.features), plain.predict(z.features))


def test_fitter_hook_receives_columns(iris):
    seen = []

    def fitter(x, y, col):
        seen.append((col, x.shape[0]))
        return ConstantLearner(0.0)

    m = build_baseline("ovo", 3)
    train_ecoc(iris, m, LearnerSpec("knn_classifier"), fitter=fitter)
    assert seen == [(0, 100), (1, 100), (2, 100)]
