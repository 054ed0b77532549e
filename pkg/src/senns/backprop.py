"""Standard backpropagation for B(a; c) = 1/2 ||a - c||^2 and the pairwise gradient built from it.

The pairwise term 1/2 ||a_t - a_u||^2 has both ends depending on the
weights. Its gradient is the sum of two ordinary backprop calls: one with
input x_t and the frozen output of x_u as target, one with the roles swapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .network import ForwardTrace, Network, forward


@dataclass
class GradientBuffer:
    dW: list[np.ndarray]
    db: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> "GradientBuffer":
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def __add__(self, other: "GradientBuffer") -> "GradientBuffer":
        return GradientBuffer(
            [a + b for a, b in zip(self.dW, other.dW)],
            [a + b for a, b in zip(self.db, other.db)],
        )

    def __sub__(self, other: "GradientBuffer") -> "GradientBuffer":
        return self + other.scaled(-1.0)

    def __neg__(self) -> "GradientBuffer":
        return self.scaled(-1.0)

    def scaled(self, factor: float) -> "GradientBuffer":
        return GradientBuffer([factor * a for a in self.dW], [factor * a for a in self.db])

    def iadd(self, other: "GradientBuffer", factor: float = 1.0) -> "GradientBuffer":
        """In-place ``self += factor * other``."""
        for a, b in zip(self.dW, other.dW):
            a += factor * b
        for a, b in zip(self.db, other.db):
            a += factor * b
        return self

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.dW, self.db):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.dW + self.db)

    def coordinates(self):
        """Names for the entries of ``flat()``, e.g. ``W[2][0,1]`` or ``b[1][3]``."""
        names = []
        for l, (w, b) in enumerate(zip(self.dW, self.db), start=1):
            names.extend(f"W[{l}][{i},{j}]" for i in range(w.shape[0]) for j in range(w.shape[1]))
            names.extend(f"b[{l}][{i}]" for i in range(b.shape[0]))
        return names


def backprop_deltas(net: Network, trace: ForwardTrace, output_error: np.ndarray) -> GradientBuffer:
    """Backpropagate an output-layer error through ``trace``.

    ``output_error`` is dL/da at the output layer (one row per example when the
    trace is batched). Gradients of a batched trace are summed over its rows.
    """
    a = [np.atleast_2d(x) for x in trace.a]
    z = [np.atleast_2d(x) for x in trace.z]
    err = np.atleast_2d(np.asarray(output_error, dtype=np.float64))
    if err.shape != a[-1].shape:
        raise ShapeError("output error shape", a[-1].shape, err.shape)
    n = len(net.weights)
    dW = [None] * n
    db = [None] * n
    delta = err * net.transfer[-1].fprime(z[-1])
    for l in range(n - 1, -1, -1):
        dW[l] = delta.T @ a[l]
        db[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l]) * net.transfer[l - 1].fprime(z[l - 1])
    return GradientBuffer(dW, db)


def backprop_sq(net: Network, trace: ForwardTrace, target) -> GradientBuffer:
    """Gradient of 1/2 ||a - target||^2 for the output ``a`` recorded in ``trace``.

    ``target`` is a constant: no gradient flows through it.
    """
    out = trace.a[-1]
    target = np.asarray(target, dtype=np.float64)
    if target.shape != out.shape:
        raise ShapeError("target shape", out.shape, target.shape)
    return backprop_deltas(net, trace, out - target)


def grad_j1_pair(net: Network, x_t, x_u, traces: tuple[ForwardTrace, ForwardTrace] | None = None) -> GradientBuffer:
    """Gradient of 1/2 ||a(x_t) - a(x_u)||^2 via two standard backprop calls.

    Without ``traces`` both forward passes are recomputed; passing cached
    traces for (x_t, x_u) skips them.
    """
    if traces is None:
        trace_t = forward(net, x_t)
        trace_u = forward(net, x_u)
    else:
        trace_t, trace_u = traces
    a_t = trace_t.a[-1].copy()
    a_u = trace_u.a[-1].copy()
    first = backprop_sq(net, trace_t, a_u)
    second = backprop_sq(net, trace_u, a_t)
    return first + second
