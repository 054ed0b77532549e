"""Class indicators, pair weights and exact evaluation of the objective.

The objective over a pair list is

    J = 1/2 * sum_{(t,u)} S(t,u) * ||a_t - a_u||^2          (j1)
        + lambda3 / m * sum_t ||a_t||_1                     (j2)
        + lambda4 / 2 * sum_l ||W_l||_F^2                   (j3)

with S(t,u) = lambda1 / M_C for same-class pairs and -lambda2 / M_D
otherwise, where ``a`` are output-layer activations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClassError, HyperparamError
from .network import Network, predict

LAMBDA_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.25
    lambda2: float = 0.25
    lambda3: float = 0.25
    lambda4: float = 0.25
    alpha: float = 0.01
    max_iters: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        lams = self.lambdas
        for i, lam in enumerate(lams, start=1):
            if not (0.0 <= lam <= 1.0):
                raise HyperparamError(f"lambda{i}={lam} is outside [0, 1]")
        total = sum(lams)
        if abs(total - 1.0) > LAMBDA_SUM_TOL:
            raise HyperparamError(f"lambdas must sum to 1, got {total!r}")
        if not self.alpha > 0.0:
            raise HyperparamError(f"alpha must be positive, got {self.alpha}")
        if self.max_iters < 0:
            raise HyperparamError(f"max_iters must be non-negative, got {self.max_iters}")
        if not self.tol > 0:
            raise HyperparamError(f"tol must be positive, got {self.tol}")

    @property
    def lambdas(self) -> tuple[float, float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)

    @classmethod
    def from_lambdas(cls, lambdas, **kwargs) -> "Hyperparams":
        l1, l2, l3, l4 = (float(v) for v in lambdas)
        return cls(lambda1=l1, lambda2=l2, lambda3=l3, lambda4=l4, **kwargs)


@dataclass(frozen=True)
class ObjectiveValue:
    j_total: float
    j1: float
    j2: float
    j3: float


def same_class(label_t, label_u) -> int:
    return 1 if label_t == label_u else 0


def diff_class(label_t, label_u) -> int:
    return 1 - same_class(label_t, label_u)


def count_pairs(labels, exclude_self_pairs: bool = False) -> tuple[int, int]:
    """(M_C, M_D) over all ordered pairs of examples."""
    labels = np.asarray(getattr(labels, "labels", labels))
    if labels.size == 0:
        raise DegenerateClassError("cannot count pairs of an empty dataset")
    m = labels.size
    _, counts = np.unique(labels, return_counts=True)
    m_c = int(np.sum(counts.astype(np.int64) ** 2))
    if exclude_self_pairs:
        m_c -= m
    m_d = m * m - int(np.sum(counts.astype(np.int64) ** 2))
    return m_c, m_d


def s_weight(label_t, label_u, hp: Hyperparams, m_c: int, m_d: int) -> float:
    if same_class(label_t, label_u):
        if m_c == 0:
            raise DegenerateClassError("no same-class pairs: M_C is zero")
        return hp.lambda1 / m_c
    if m_d == 0:
        raise DegenerateClassError("no different-class pairs: M_D is zero")
    return -hp.lambda2 / m_d


def pair_weights(pairs, hp: Hyperparams) -> np.ndarray:
    """Vector of S(t,u) aligned with ``pairs.t``/``pairs.u``."""
    same = np.asarray(pairs.same, dtype=bool)
    w = np.empty(same.size, dtype=np.float64)
    if same.any():
        if pairs.m_c == 0:
            raise DegenerateClassError("pair list has same-class pairs but M_C is zero")
        w[same] = hp.lambda1 / pairs.m_c
    if (~same).any():
        if pairs.m_d == 0:
            raise DegenerateClassError("pair list has different-class pairs but M_D is zero")
        w[~same] = -hp.lambda2 / pairs.m_d
    return w


def j1_value(outputs: np.ndarray, pairs, hp: Hyperparams) -> float:
    if len(pairs) == 0:
        return 0.0
    diff = outputs[pairs.t] - outputs[pairs.u]
    return 0.5 * float(np.dot(pair_weights(pairs, hp), np.einsum("ij,ij->i", diff, diff)))


def j2_value(outputs: np.ndarray, hp: Hyperparams) -> float:
    return hp.lambda3 / outputs.shape[0] * float(np.abs(outputs).sum())


def j3_value(net: Network, hp: Hyperparams) -> float:
    return 0.5 * hp.lambda4 * math.fsum(float(np.sum(W * W)) for W in net.weights)


def objective_value(net: Network, dataset, pairs, hp: Hyperparams) -> ObjectiveValue:
    outputs = predict(net, dataset.inputs)
    j1 = j1_value(outputs, pairs, hp)
    j2 = j2_value(outputs, hp)
    j3 = j3_value(net, hp)
    return ObjectiveValue(j_total=j1 + j2 + j3, j1=j1, j2=j2, j3=j3)


def objective_components_graph_form(net: Network, dataset, pairs, hp: Hyperparams) -> ObjectiveValue:
    """Same objective with j1 split into its lambda1/(2 M_C) and lambda2/(2 M_D) sums."""
    outputs = predict(net, dataset.inputs)
    diff = outputs[pairs.t] - outputs[pairs.u]
    sq = np.einsum("ij,ij->i", diff, diff) if len(pairs) else np.zeros(0)
    same = np.asarray(pairs.same, dtype=bool)
    within = hp.lambda1 / (2 * pairs.m_c) * float(sq[same].sum()) if same.any() else 0.0
    between = hp.lambda2 / (2 * pairs.m_d) * float(sq[~same].sum()) if (~same).any() else 0.0
    j1 = within - between
    j2 = j2_value(outputs, hp)
    j3 = j3_value(net, hp)
    return ObjectiveValue(j_total=j1 + j2 + j3, j1=j1, j2=j2, j3=j3)
