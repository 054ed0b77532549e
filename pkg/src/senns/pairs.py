"""Pair lists over a labeled dataset: all ordered pairs, or the sparse heuristics.

Heuristic neighbours are chosen once, in input space, with the Euclidean
metric. Ties go to the lowest example index.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._io import atomic_open
from .errors import DegenerateClassError, EmptyDatasetError
from .objective import count_pairs


class PairMode(enum.Enum):
    FULL = "full"
    HEURISTIC_DC = "heuristic"


@dataclass
class PairList:
    t: np.ndarray
    u: np.ndarray
    same: np.ndarray
    m_c: int
    m_d: int
    mode: PairMode = PairMode.FULL

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.u = np.asarray(self.u, dtype=np.int64)
        self.same = np.asarray(self.same, dtype=bool)
        if not (self.t.shape == self.u.shape == self.same.shape):
            raise ValueError("pair arrays must have equal length")

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self):
        return iter(zip(self.t.tolist(), self.u.tolist(), self.same.tolist()))

    def reversed(self) -> "PairList":
        return PairList(self.u.copy(), self.t.copy(), self.same.copy(), self.m_c, self.m_d, self.mode)


def euclidean_distances(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return cdist(X, X, "euclidean")


def _labels(dataset) -> np.ndarray:
    labels = np.asarray(dataset.labels)
    if labels.size == 0:
        raise EmptyDatasetError("cannot build pairs for an empty dataset")
    return labels


def build_full(dataset, exclude_self_pairs: bool = False) -> PairList:
    labels = _labels(dataset)
    m = labels.size
    t, u = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    t, u = t.ravel(), u.ravel()
    if exclude_self_pairs:
        keep = t != u
        t, u = t[keep], u[keep]
    m_c, m_d = count_pairs(labels, exclude_self_pairs=exclude_self_pairs)
    return PairList(t, u, labels[t] == labels[u], m_c, m_d, PairMode.FULL)


def build_heuristic_d(dataset, metric=euclidean_distances) -> list[tuple[int, int]]:
    """For every example, one pair to the nearest member of each other class."""
    labels = _labels(dataset)
    classes = np.unique(labels)
    if classes.size < 2:
        raise DegenerateClassError("the nearest-other-class heuristic needs at least 2 classes")
    n_classes = getattr(dataset, "n_classes", classes.size)
    if n_classes != classes.size:
        missing = sorted(set(range(n_classes)) - set(classes.tolist()))
        raise DegenerateClassError(f"classes without members: {missing}")
    dist = metric(dataset.inputs)
    members = {c: np.flatnonzero(labels == c) for c in classes.tolist()}
    out = []
    for t in range(labels.size):
        for c in classes.tolist():
            if c == labels[t]:
                continue
            idx = members[c]
            # argmin returns the first (lowest-index) minimum
            out.append((t, int(idx[np.argmin(dist[t, idx])])))
    return out


def build_heuristic_c(dataset, k: int, metric=euclidean_distances) -> list[tuple[int, int]]:
    """For every example, pairs to its k farthest same-class examples (self excluded)."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    labels = _labels(dataset)
    dist = metric(dataset.inputs)
    out = []
    for t in range(labels.size):
        idx = np.flatnonzero(labels == labels[t])
        idx = idx[idx != t]
        if idx.size == 0:
            continue
        # sort by descending distance, then ascending index
        order = np.lexsort((idx, -dist[t, idx]))
        out.extend((t, int(u)) for u in idx[order[:k]])
    return out


def build_heuristic(dataset, k: int, metric=euclidean_distances) -> PairList:
    same_pairs = build_heuristic_c(dataset, k, metric)
    diff_pairs = build_heuristic_d(dataset, metric)
    rows = [(t, u, True) for t, u in same_pairs] + [(t, u, False) for t, u in diff_pairs]
    # stable sort on t keeps same-class (by distance rank) before different-class (by class id)
    rows.sort(key=lambda r: r[0])
    t = np.array([r[0] for r in rows], dtype=np.int64)
    u = np.array([r[1] for r in rows], dtype=np.int64)
    same = np.array([r[2] for r in rows], dtype=bool)
    return PairList(t, u, same, len(same_pairs), len(diff_pairs), PairMode.HEURISTIC_DC)


def write_csv(pairs: PairList, path) -> None:
    with atomic_open(path, "w") as fh:
        fh.write(f"# mode={pairs.mode.value} m_c={pairs.m_c} m_d={pairs.m_d}\n")
        fh.write("t,u,same_class\n")
        for t, u, s in pairs:
            fh.write(f"{t},{u},{int(s)}\n")


def read_csv(path) -> PairList:
    meta = {}
    t, u, same = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    meta[key] = val
                continue
            if line.startswith("t,"):
                continue
            a, b, c = line.split(",")
            t.append(int(a))
            u.append(int(b))
            same.append(bool(int(c)))
    return PairList(t, u, same, int(meta["m_c"]), int(meta["m_d"]), PairMode(meta.get("mode", "full")))
