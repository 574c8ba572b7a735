"""Command-line entry point: encode, train, predict, benchmark, oracle-check."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import pickle
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracles
from .coding import ALL_KINDS, TREE_KINDS, CodingError, build_matrix, matrix_to_csv, read_matrix_csv, validate_matrix
from .data import UCI_DATASETS, DataError, Dataset, Standardizer, load_csv, load_named
from .evaluation import CVOptions, benchmark, learner_for, metrics
from .learners import LearnerSpec, fit
from .partition import ClassStats, exhaustive_bipartition, is_local_optimum, sffs_bipartition
from .pipeline import TARGET_MODES, train_ecoc

log = logging.getLogger("csecoc")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
MODEL_FORMAT_VERSION = 1
# order of the comparison tables
METHOD_ORDER = ("ova", "ovo", "dense_random", "sparse_random", "decoc_like", "csecoc")
MAX_ORACLE_CLASSES = 12


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str | None = None
    datasets: str = "all"
    method: str = "csecoc"
    methods: str = "all"
    learner: str = "knn"
    knn_k: int = 5
    gamma: float | None = None
    ridge_lambda: float = 1.0
    folds: int = 10
    repeats: int = 10
    seed: int = 42
    eps: float = 1e-9
    standardize: bool = False
    leaky_matrix: bool = False
    target_mode: str = "coverage"
    candidates: int = 1000
    workers: int = 1
    data_dir: str = "data"
    label_column: str = "last"
    header: bool = False
    out: str | None = None
    matrix_out: str | None = None
    model: str | None = None
    matrix: str | None = None

    def validate(self) -> "RunConfig":
        if self.method not in ALL_KINDS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(ALL_KINDS)}")
        for name in self.method_list():
            if name not in ALL_KINDS:
                raise ConfigError(f"unknown method {name!r}")
        if self.learner not in ("knn", "kernel", "all"):
            raise ConfigError("learner must be knn, kernel or all")
        if self.knn_k < 1:
            raise ConfigError("--knn-k must be >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("--gamma must be > 0")
        if not self.ridge_lambda >= 0:
            raise ConfigError("--ridge-lambda must be >= 0")
        if self.folds < 2:
            raise ConfigError("--folds must be >= 2")
        if self.repeats < 1:
            raise ConfigError("--repeats must be >= 1")
        if self.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if not self.eps > 0:
            raise ConfigError("--eps must be > 0")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if self.candidates < 1:
            raise ConfigError("--candidates must be >= 1")
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"--target-mode must be one of {TARGET_MODES}")
        if self.label_column not in ("first", "last"):
            try:
                int(self.label_column)
            except ValueError:
                raise ConfigError("--label-column must be first, last or an integer") from None
        return self

    def method_list(self) -> list[str]:
        if self.methods.strip() == "all":
            return list(METHOD_ORDER)
        return [m.strip() for m in self.methods.split(",") if m.strip()]

    def learner_list(self) -> list[str]:
        return ["knn", "kernel"] if self.learner == "all" else [self.learner]

    def learner_params(self) -> dict:
        return {"k": self.knn_k, "gamma": self.gamma, "ridge_lambda": self.ridge_lambda}

    def options(self) -> CVOptions:
        return CVOptions(self.eps, self.standardize, self.leaky_matrix, self.target_mode, self.seed, self.candidates)

    def reproducible_dict(self) -> dict:
        # worker count and output paths never change results
        d = dataclasses.asdict(self)
        for key in ("workers", "out", "matrix_out", "model"):
            d.pop(key)
        return d


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if raw.strip().lower() in ("none", "") and "None" in str(kind):
        return None
    if "bool" in str(kind):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if "int" in str(kind):
            return int(raw)
        if "float" in str(kind):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw.strip()


def read_config_file(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csecoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        s = argparse.SUPPRESS
        p.add_argument("--config", default=None, help="optional key=value file; flags take precedence")
        p.add_argument("--dataset", default=s, help="dataset name (%s) or CSV path" % ", ".join(UCI_DATASETS))
        p.add_argument("--data-dir", dest="data_dir", default=s)
        p.add_argument("--label-column", dest="label_column", default=s, help="first, last or index (CSV paths only)")
        p.add_argument("--header", action="store_true", default=s, help="CSV path has a header row")
        p.add_argument("--method", default=s, choices=ALL_KINDS)
        p.add_argument("--learner", default=s, choices=("knn", "kernel", "all"))
        p.add_argument("--knn-k", dest="knn_k", type=int, default=s)
        p.add_argument("--gamma", type=float, default=s)
        p.add_argument("--ridge-lambda", dest="ridge_lambda", type=float, default=s)
        p.add_argument("--seed", type=int, default=s)
        p.add_argument("--eps", type=float, default=s)
        p.add_argument("--standardize", action="store_true", default=s)
        p.add_argument("--target-mode", dest="target_mode", default=s, choices=TARGET_MODES)
        p.add_argument("--candidates", type=int, default=s)
        p.add_argument("--out", default=s)
        return p

    p = common(sub.add_parser("encode", help="build and write a coding matrix"))
    p.add_argument("--matrix-out", dest="matrix_out", default=argparse.SUPPRESS)

    p = common(sub.add_parser("train", help="fit an ECOC model and save it to --out DIR"))
    p.add_argument("--matrix-out", dest="matrix_out", default=argparse.SUPPRESS)

    p = common(sub.add_parser("predict", help="classify --dataset with a model saved by train"))
    p.add_argument("--model", default=argparse.SUPPRESS)

    p = common(sub.add_parser("benchmark", help="repeated stratified CV over datasets x methods"))
    p.add_argument("--datasets", default=argparse.SUPPRESS, help="comma list or 'all'")
    p.add_argument("--methods", default=argparse.SUPPRESS, help="comma list or 'all'")
    p.add_argument("--folds", "--k", dest="folds", type=int, default=argparse.SUPPRESS)
    p.add_argument("--repeats", type=int, default=argparse.SUPPRESS)
    p.add_argument("--leaky-matrix", dest="leaky_matrix", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS)

    p = common(sub.add_parser("oracle-check", help="compare production code against brute-force oracles"))
    p.add_argument("--matrix", default=argparse.SUPPRESS, help="also validate this matrix CSV (kind from --method)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key, val in vars(args).items():
        if key in _FIELD_TYPES:
            values[key] = val
    return RunConfig(**values).validate()


def resolve_dataset(source: str, cfg: RunConfig) -> Dataset:
    if source in UCI_DATASETS:
        return load_named(source, cfg.data_dir)
    path = Path(source)
    if not path.exists() and (Path(cfg.data_dir) / path.name).exists():
        path = Path(cfg.data_dir) / path.name
    for name, src in UCI_DATASETS.items():
        if path.name == src.filename:
            return load_csv(path, src.label_column, src.has_header, src.missing_policy, name=name)
    label = cfg.label_column if cfg.label_column in ("first", "last") else int(cfg.label_column)
    return load_csv(path, label, cfg.header)


def _require_dataset(cfg: RunConfig) -> Dataset:
    if not cfg.dataset:
        raise ConfigError("--dataset is required")
    return resolve_dataset(cfg.dataset, cfg)


def _encoded_space(ds: Dataset, cfg: RunConfig):
    if not cfg.standardize:
        return ds, None
    st = Standardizer.fit(ds.features)
    return ds.with_features(st.transform(ds.features)), st


def _column_note(m) -> list[dict]:
    return [
        {"column": f"H{j}", "g1": [m.class_names[c] for c in cm.g1], "g2": [m.class_names[c] for c in cm.g2], "score": cm.score}
        for j, cm in enumerate(m.column_meta)
    ]


def cmd_encode(cfg: RunConfig) -> int:
    ds, _ = _encoded_space(_require_dataset(cfg), cfg)
    m = build_matrix(cfg.method, ds, cfg.eps, cfg.seed, cfg.candidates)
    text = matrix_to_csv(m)
    note = {"kind": m.kind, "dataset": ds.name, "columns": _column_note(m), "config": cfg.reproducible_dict()}
    target = cfg.matrix_out or cfg.out
    if target:
        Path(target).write_text(text)
        Path(str(target) + ".json").write_text(json.dumps(note, indent=2, sort_keys=True) + "\n")
        print(f"wrote {m.n_classes}x{m.n_columns} {m.kind} matrix to {target}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    for col in note["columns"]:
        log.info("%s: %s | %s  E=%s", col["column"], col["g1"], col["g2"], col["score"])
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    if not cfg.out:
        raise ConfigError("train needs --out DIR")
    if cfg.learner == "all":
        raise ConfigError("train needs a single --learner")
    raw = _require_dataset(cfg)
    ds, st = _encoded_space(raw, cfg)
    m = build_matrix(cfg.method, ds, cfg.eps, cfg.seed, cfg.candidates)
    spec = learner_for(cfg.method, cfg.learner, **cfg.learner_params())
    model = train_ecoc(ds, m, spec, target_mode=cfg.target_mode, standardizer=st)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matrix.csv").write_text(matrix_to_csv(m))
    manifest = {
        "format_version": MODEL_FORMAT_VERSION,
        "method": cfg.method,
        "learner": spec.as_dict(),
        "decoding": model.decoding,
        "target_mode": cfg.target_mode,
        "standardize": cfg.standardize,
        "class_names": list(m.class_names),
        "columns": _column_note(m),
        "config": cfg.reproducible_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with open(out / "model.pkl", "wb") as fh:
        pickle.dump({"format_version": MODEL_FORMAT_VERSION, "model": model}, fh)
    train_acc = float(np.mean(model.predict(raw.features) == raw.labels))
    print(f"trained {m.n_columns} learners; training accuracy {train_acc:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    if not cfg.model:
        raise ConfigError("predict needs --model DIR")
    with open(Path(cfg.model) / "model.pkl", "rb") as fh:
        blob = pickle.load(fh)
    if blob.get("format_version") != MODEL_FORMAT_VERSION:
        raise RuntimeError(f"unsupported model format {blob.get('format_version')}")
    model = blob["model"]
    ds = _require_dataset(cfg)
    preds = model.predict(ds.features)
    names = [model.matrix.class_names[p] for p in preds]
    text = "\n".join(names) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    # queries labelled with the model's class names get scored
    if set(ds.class_names) <= set(model.matrix.class_names):
        truth = [ds.class_names[i] for i in ds.labels]
        acc = float(np.mean([a == b for a, b in zip(names, truth)]))
        print(f"accuracy {acc:.4f} on {ds.n_samples} samples", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    names = list(UCI_DATASETS) if cfg.datasets.strip() == "all" else [d.strip() for d in cfg.datasets.split(",") if d.strip()]
    loaded, load_failures = [], []
    for name in names:
        try:
            loaded.append(resolve_dataset(name, cfg))
        except DataError as exc:
            log.warning("dataset %s unavailable: %s", name, exc)
            for learner in cfg.learner_list():
                for method in cfg.method_list():
                    load_failures.append({"dataset": name, "method": method, "learner_choice": learner, "error": f"DataError: {exc}"})
    metadata = {
        "config": cfg.reproducible_dict(),
        "design": {
            "inner_group_normalization": "2/(T(T-1)), 0 for singletons",
            "criterion_denominator_clamp": cfg.eps,
            "objective": "maximize",
            "sffs_tolerance": "1e-12 * max(1, |E|)",
            "group_centroid": "sample-weighted",
            "coverage_fit": "training fold",
            "matrix_rebuild": "whole dataset (leaky)" if cfg.leaky_matrix else "per training fold",
            "random_columns": "ceil(10 log2 Nc) dense, ceil(15 log2 Nc) sparse",
            "ovo_size": "Nc(Nc-1)/2",
            "decoding": "euclidean for regressors, attenuated hamming for classifiers",
            "dermatology_missing_values": "drop_row",
            "standardize": cfg.standardize,
        },
    }
    report = benchmark(
        loaded,
        cfg.method_list(),
        cfg.learner_list(),
        seed=cfg.seed,
        k=cfg.folds,
        repeats=cfg.repeats,
        options=cfg.options(),
        workers=cfg.workers,
        learner_params=cfg.learner_params(),
        metadata=metadata,
    )
    report.failures[:0] = load_failures
    out = Path(cfg.out or "benchmark.json")
    out.write_text(report.to_json())
    out.with_suffix(".txt").write_text(report.to_text())
    sys.stdout.write(report.to_text())
    print(f"report: {out} and {out.with_suffix('.txt')}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig) -> int:
    ds = _require_dataset(cfg)
    if ds.n_classes > MAX_ORACLE_CLASSES:
        raise RuntimeError(f"{ds.n_classes} classes is too many for enumeration (max {MAX_ORACLE_CLASSES})")
    ds, _ = _encoded_space(ds, cfg)
    results: list[tuple[str, bool, str]] = []

    def check(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    from .coding import build_csecoc, build_decoc_like

    m = build_csecoc(ds, cfg.eps)
    rep = validate_matrix(m, ds.class_counts)
    check("csecoc matrix validity", rep.ok, "; ".join(rep.violations + rep.warnings))
    hard = build_decoc_like(ds, cfg.eps)
    check("decoc_like validity", validate_matrix(hard).ok)
    sign_ok = all(
        np.sign(m.values[r, j]) in (0.0, hard.values[r, j]) for r in range(m.n_classes) for j in range(m.n_columns)
    )
    check("decoc_like signs match csecoc tree", sign_ok)

    stats = ClassStats(ds)
    worst_ratio = 1.0
    for j, cm in enumerate(m.column_meta):
        node = sorted(cm.g1 + cm.g2)
        part = sffs_bipartition(ds, node, cfg.eps, stats=stats)
        cov = oracles.brute_coverage(ds.features, ds.labels, ds.n_classes, set(cm.g1), set(cm.g2))
        check(f"H{j} coverage = brute force", np.array_equal(np.array(cov), m.values[:, j]))
        check(f"H{j} sffs local optimum", is_local_optimum(ds, part, cfg.eps))
        brute_e = oracles.brute_partition_score(ds.features, ds.labels, part.g1, part.g2, cfg.eps)
        check(f"H{j} criterion = brute force", np.isclose(brute_e, part.score, rtol=1e-9, atol=0))
        best = exhaustive_bipartition(ds, node, cfg.eps, stats=stats)
        ratio = part.score / best.score if best.score > 0 else 1.0
        worst_ratio = min(worst_ratio, ratio)
        print(f"  [info] H{j} sffs/exhaustive = {ratio:.4f} ({part.score:.6g} vs {best.score:.6g})")

    rng = np.random.default_rng(cfg.seed)
    metric_ok = True
    for _ in range(100):
        n = int(rng.integers(1, 60))
        y = rng.integers(0, ds.n_classes, n)
        p = rng.integers(0, ds.n_classes, n)
        got = metrics(y, p, ds.n_classes)
        ref = oracles.confusion_metrics(y, p, ds.n_classes)
        metric_ok &= all(abs(got[k] - ref[k]) <= 1e-12 for k in ref)
    check("metrics = confusion-matrix recomputation (100 draws)", metric_ok)

    spec = LearnerSpec("knn_regressor", k=cfg.knn_k)
    y = rng.uniform(-1, 1, ds.n_samples)
    lrn = fit(spec, ds.features, y)
    queries = ds.features[rng.integers(0, ds.n_samples, 20)] + rng.normal(0, 0.1, (20, ds.n_features))
    knn_ok = all(
        lrn.predict(q)[0] == oracles.brute_knn_mean(ds.features.tolist(), y.tolist(), q.tolist(), cfg.knn_k) for q in queries
    )
    check("knn regressor = full-sort oracle", knn_ok)

    if cfg.matrix:
        try:
            injected = read_matrix_csv(cfg.matrix, kind=cfg.method if cfg.method not in TREE_KINDS else "ova")
            irep = validate_matrix(injected)
            check(f"injected matrix {cfg.matrix} validity", irep.ok, "; ".join(irep.violations))
        except (OSError, CodingError, ValueError) as exc:
            check(f"injected matrix {cfg.matrix} readable", False, str(exc))

    failed = 0
    for name, ok, detail in results:
        failed += not ok
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail and not ok else ""))
    print(f"  [info] worst sffs/exhaustive ratio {worst_ratio:.4f} (reported, not failed)")
    print(f"{len(results) - failed}/{len(results)} hard checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


COMMANDS = {
    "encode": cmd_encode,
    "train": cmd_train,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
