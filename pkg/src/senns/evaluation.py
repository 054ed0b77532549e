"""Checks on extracted features: kNN accuracy, class scatter ratio, sparsity."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateClassError, ShapeError


@dataclass
class EvalReport:
    knn_accuracy: float
    scatter_ratio: float
    mean_l1: float
    near_zero_fraction: float
    k: int = 1
    epsilon: float = 1e-3
    m: int = 0

    def to_text(self) -> str:
        return "".join(f"{key}={_fmt(val)}\n" for key, val in asdict(self).items())

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        d = asdict(self)
        w.writerow(list(d))
        w.writerow([_fmt(v) for v in d.values()])
        return out.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return cdist(A, B, "sqeuclidean")


def knn_classify(train_features, train_labels, test_features, k: int = 1, exclude_self: bool = False) -> np.ndarray:
    """Euclidean k-nearest-neighbour majority vote.

    Distance ties go to the lower training index, vote ties to the smaller
    class id. ``exclude_self`` skips the training point at the same index as
    the query, giving leave-one-out predictions when train and test coincide.
    """
    train = np.atleast_2d(np.asarray(train_features, dtype=np.float64))
    test = np.atleast_2d(np.asarray(test_features, dtype=np.float64))
    labels = np.asarray(train_labels, dtype=np.int64)
    if k < 1:
        raise ValueError("k must be at least 1")
    if train.shape[0] == 0:
        raise ValueError("empty training set")
    if train.shape[1] != test.shape[1]:
        raise ShapeError("feature dimension", train.shape[1], test.shape[1])
    d = _sq_dists(test, train)
    if exclude_self:
        np.fill_diagonal(d, np.inf)
    n_avail = train.shape[0] - (1 if exclude_self else 0)
    kk = min(k, n_avail)
    n_classes = int(labels.max()) + 1
    preds = np.empty(test.shape[0], dtype=np.int64)
    idx = np.arange(train.shape[0])
    for i in range(test.shape[0]):
        order = np.lexsort((idx, d[i]))[:kk]
        votes = np.bincount(labels[order], minlength=n_classes)
        preds[i] = int(np.argmax(votes))  # argmax picks the smallest id on ties
    return preds


def knn_accuracy(train_features, train_labels, test_features, test_labels, k: int = 1) -> float:
    pred = knn_classify(train_features, train_labels, test_features, k)
    return float(np.mean(pred == np.asarray(test_labels)))


def scatter_ratio(features, labels, pairs=None) -> float:
    """Mean same-class squared distance over mean different-class squared distance.

    Uses all ordered pairs, or only those in ``pairs`` when given. Self-pairs
    are excluded from the same-class mean. Returns ``inf`` when every
    different-class distance is zero.
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise DegenerateClassError("scatter ratio needs at least two classes")
    if pairs is None:
        d = _sq_dists(X, X)
        same = y[:, None] == y[None, :]
        np.fill_diagonal(same, False)
        diff = y[:, None] != y[None, :]
        same_d, diff_d = d[same], d[diff]
    else:
        d = np.sum((X[pairs.t] - X[pairs.u]) ** 2, axis=1)
        is_same = y[pairs.t] == y[pairs.u]
        same_d = d[is_same & (pairs.t != pairs.u)]
        diff_d = d[~is_same]
        if diff_d.size == 0:
            raise DegenerateClassError("pair list has no different-class pairs")
    intra = float(same_d.mean()) if same_d.size else 0.0
    inter = float(diff_d.mean())
    if inter == 0.0:
        return math.inf
    return intra / inter


def sparsity_metrics(features, epsilon: float = 1e-3) -> tuple[float, float]:
    """(mean L1 norm per feature vector, fraction of entries with |v| < epsilon)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    mean_l1 = float(np.abs(X).sum(axis=1).mean())
    near_zero = float(np.mean(np.abs(X) < epsilon))
    return mean_l1, near_zero


def evaluate(features, labels, k: int = 1, epsilon: float = 1e-3) -> EvalReport:
    """Report for a single feature set; kNN accuracy is leave-one-out."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] < 2:
        raise ValueError("leave-one-out evaluation needs at least 2 examples")
    acc = float(np.mean(knn_classify(X, y, X, k, exclude_self=True) == y))
    mean_l1, nz = sparsity_metrics(X, epsilon)
    return EvalReport(
        knn_accuracy=acc,
        scatter_ratio=scatter_ratio(X, y),
        mean_l1=mean_l1,
        near_zero_fraction=nz,
        k=k,
        epsilon=epsilon,
        m=X.shape[0],
    )
