"""Gradient of the output L1 norm ||a||_1 by backpropagating signed derivatives.

At the output layer the usual error term (a - y) is replaced by sign(a),
with sign(0) = 0 chosen as the subgradient at the kink. The backward
recursion is otherwise the standard one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backprop import GradientBuffer
from .network import ForwardTrace, Network, forward


def sign(v):
    """+1, -1 or 0; works elementwise on arrays."""
    if np.ndim(v) == 0:
        v = float(v)
        return 1 if v > 0 else (-1 if v < 0 else 0)
    return np.sign(np.asarray(v, dtype=np.float64))


@dataclass
class SignedDeltaStack:
    """beta[k] holds the signed derivatives of layer k + 2."""

    beta: list[np.ndarray]


def signed_deltas(net: Network, trace: ForwardTrace, output_factor=None) -> SignedDeltaStack:
    """Signed derivatives for every non-input layer.

    ``output_factor`` maps the output activations to the factor multiplying
    f'(z) at the output layer. It defaults to ``sign``; substituting
    ``lambda a: a - y`` turns the recursion into ordinary backprop.
    """
    a_out = trace.a[-1]
    factor = sign(a_out) if output_factor is None else np.asarray(output_factor(a_out), dtype=np.float64)
    n = len(net.weights)
    beta = [None] * n
    beta[-1] = factor * net.transfer[-1].fprime(trace.z[-1])
    for l in range(n - 1, 0, -1):
        # beta_i^(l) = sum_j beta_j^(l+1) W_ji^(l) f'(z_i^(l)), j over s_{l+1}
        beta[l - 1] = (beta[l] @ net.weights[l]) * net.transfer[l - 1].fprime(trace.z[l - 1])
    return SignedDeltaStack(beta)


def _gradients_from_beta(trace: ForwardTrace, stack: SignedDeltaStack) -> GradientBuffer:
    dW, db = [], []
    for a_prev, beta in zip(trace.a[:-1], stack.beta):
        if beta.ndim == 1:
            dW.append(np.outer(beta, a_prev))
            db.append(beta.copy())
        else:
            dW.append(beta.T @ a_prev)
            db.append(beta.sum(axis=0))
    return GradientBuffer(dW, db)


def grad_j2_single(net: Network, x_t, trace: ForwardTrace | None = None, output_factor=None) -> GradientBuffer:
    """Gradient of ||a(x_t)||_1 with respect to all weights and biases."""
    if trace is None:
        trace = forward(net, x_t)
    return _gradients_from_beta(trace, signed_deltas(net, trace, output_factor))


def grad_j2_batch(net: Network, trace: ForwardTrace) -> GradientBuffer:
    """Sum over the rows of a batched trace of the per-example L1 gradients."""
    return _gradients_from_beta(trace, signed_deltas(net, trace))
