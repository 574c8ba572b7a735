"""Brute-force reference computations.

These deliberately share no code with the production paths: plain Python
loops over samples, recomputed means, a confusion matrix, a full sort.
"""

from __future__ import annotations

import math


def _mean_rows(rows):
    n = len(rows)
    return [sum(r[j] for r in rows) / n for j in range(len(rows[0]))]


def _dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def brute_coverage(features, labels, nc, g1, g2):
    """Signed nearest-group-centroid fraction per class, by per-sample counting."""
    feats = [list(map(float, r)) for r in features]
    labs = [int(v) for v in labels]
    c1 = _mean_rows([f for f, lab in zip(feats, labs) if lab in g1])
    c2 = _mean_rows([f for f, lab in zip(feats, labs) if lab in g2])
    out = [0.0] * nc
    for c in list(g1) + list(g2):
        members = [f for f, lab in zip(feats, labs) if lab == c]
        hits = 0
        for f in members:
            closer_to_1 = _dist(f, c1) <= _dist(f, c2)
            if (c in g1) == closer_to_1:
                hits += 1
        out[c] = hits / len(members) if c in g1 else -hits / len(members)
    return out


def brute_partition_score(features, labels, g1, g2, eps=1e-9):
    feats = [list(map(float, r)) for r in features]
    labs = [int(v) for v in labels]

    def centroid(classes):
        return _mean_rows([f for f, lab in zip(feats, labs) if lab in classes])

    def inner(classes):
        cl = sorted(classes)
        if len(cl) <= 1:
            return 0.0
        cents = [centroid({c}) for c in cl]
        total = sum(_dist(cents[i], cents[j]) for i in range(len(cl)) for j in range(i + 1, len(cl)))
        return total / (len(cl) * (len(cl) - 1) / 2)

    return _dist(centroid(set(g1)), centroid(set(g2))) / max(inner(g1) + inner(g2), eps)


def confusion_metrics(labels, preds, nc, beta=1.0):
    """Class-averaged one-vs-rest scores read off an nc x nc confusion matrix."""
    cm = [[0] * nc for _ in range(nc)]
    for t, p in zip(labels, preds):
        cm[int(t)][int(p)] += 1
    n = len(labels)
    b2 = beta * beta
    acc = prec = rec = fs = 0.0
    for i in range(nc):
        tp = cm[i][i]
        pos = sum(cm[i])
        predicted = sum(cm[r][i] for r in range(nc))
        fp = predicted - tp
        fn = pos - tp
        tn = n - tp - fp - fn
        acc += (tp + tn) / n
        p = tp / predicted if predicted else 0.0
        r = tp / pos if pos else 0.0
        prec += p
        rec += r
        fs += (b2 + 1) * p * r / (b2 * p + r) if (b2 * p + r) > 0 else 0.0
    return {"accuracy": acc / nc, "precision": prec / nc, "recall": rec / nc, "fscore": fs / nc}


def brute_knn_mean(train_x, train_y, query, k):
    """Mean target of the k nearest training points (full sort, index tie-break)."""
    order = sorted(range(len(train_x)), key=lambda i: (sum((a - b) ** 2 for a, b in zip(train_x[i], query)), i))
    chosen = order[: min(k, len(order))]
    return sum(float(train_y[i]) for i in chosen) / len(chosen)
