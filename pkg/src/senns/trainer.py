"""Full-batch gradient descent on the objective, plus a finite-difference oracle."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_open
from .backprop import GradientBuffer, backprop_deltas, grad_j1_pair
from .errors import NumericError, ShapeError
from .grad_l1 import grad_j2_batch, grad_j2_single
from .network import Network, forward
from .objective import Hyperparams, ObjectiveValue, objective_value, pair_weights

log = logging.getLogger(__name__)

MODES = ("fast", "strict")


def grad_total(
    net: Network,
    dataset,
    pairs,
    hp: Hyperparams,
    mode: str = "fast",
    threads: int = 1,
    reproducible: bool = True,
) -> GradientBuffer:
    """Gradient of the full objective with respect to every weight and bias.

    ``mode="strict"`` runs the two-backprop pair gradient once per pair and the
    L1 backprop once per example, recomputing forward passes each time.
    ``mode="fast"`` forwards the whole batch once and, since backprop is linear
    in the output error, folds each example's pair contributions into a single
    output error before one batched backward pass. Both give the same result
    up to floating-point summation order.
    """
    if mode not in MODES:
        raise ValueError(f"unknown gradient mode {mode!r}; expected one of {MODES}")
    X = dataset.inputs
    m = X.shape[0]
    if X.shape[1] != net.n_inputs:
        raise ShapeError("dataset dimension vs network input size", net.n_inputs, X.shape[1])
    weights = pair_weights(pairs, hp) if len(pairs) else np.zeros(0)

    if mode == "fast":
        trace = forward(net, X)
        out = trace.a[-1]
        g = np.zeros_like(out)
        if len(pairs):
            diff = weights[:, None] * (out[pairs.t] - out[pairs.u])
            np.add.at(g, pairs.t, diff)
            np.add.at(g, pairs.u, -diff)
        grad = backprop_deltas(net, trace, g)
        if hp.lambda3:
            grad.iadd(grad_j2_batch(net, trace), hp.lambda3 / m)
    else:
        grad = _strict_j1(net, X, pairs, weights, threads, reproducible)
        if hp.lambda3:
            l1 = GradientBuffer.zeros_like(net)
            for t in range(m):
                l1.iadd(grad_j2_single(net, X[t]))
            grad.iadd(l1, hp.lambda3 / m)

    for dW, W in zip(grad.dW, net.weights):
        dW += hp.lambda4 * W
    return grad


def _strict_j1(net, X, pairs, weights, threads, reproducible) -> GradientBuffer:
    items = [(t, u, w) for (t, u, _), w in zip(pairs, weights.tolist()) if w != 0.0]

    def run(chunk):
        acc = GradientBuffer.zeros_like(net)
        for t, u, w in chunk:
            acc.iadd(grad_j1_pair(net, X[t], X[u]), w)
        return acc

    if threads <= 1 or len(items) < 2:
        return run(items)
    n_chunks = min(threads * 4, len(items))
    bounds = np.linspace(0, len(items), n_chunks + 1).astype(int)
    chunks = [items[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    total = GradientBuffer.zeros_like(net)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run, c) for c in chunks]
        # reproducible mode reduces in chunk order; otherwise in completion order
        for fut in (futures if reproducible else as_completed(futures)):
            total.iadd(fut.result())
    return total


def sgd_step(net: Network, grad: GradientBuffer, alpha: float) -> Network:
    """One descent step; returns a new network and leaves ``net`` untouched."""
    return Network(
        list(net.layer_sizes),
        [W - alpha * dW for W, dW in zip(net.weights, grad.dW)],
        [b - alpha * db for b, db in zip(net.biases, grad.db)],
        list(net.transfer),
    )


@dataclass
class TrainReport:
    history: list[ObjectiveValue]
    network: Network
    iterations_run: int
    converged: bool
    seed: int | None = None
    alphas: list[float] = field(default_factory=list)

    @property
    def final(self) -> ObjectiveValue:
        return self.history[-1]

    def write_telemetry(self, path) -> None:
        with atomic_open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "J", "J1", "J2", "J3"])
            for i, v in enumerate(self.history):
                w.writerow([i, repr(v.j_total), repr(v.j1), repr(v.j2), repr(v.j3)])


def relative_change(prev: float, cur: float) -> float:
    return abs(prev - cur) / max(1.0, abs(prev))


def train(
    net: Network,
    dataset,
    pairs,
    hp: Hyperparams,
    seed: int | None = None,
    mode: str = "fast",
    threads: int = 1,
    reproducible: bool = True,
    halve_on_increase: bool = False,
    callback=None,
) -> TrainReport:
    """Plain full-batch gradient descent with learning rate ``hp.alpha``.

    Stops when |J_prev - J| / max(1, |J_prev|) <= hp.tol or after
    hp.max_iters steps. Before the first step the change counts as +inf, so
    only ``tol=inf`` stops immediately. With ``halve_on_increase`` a step
    that raises J is rejected and retried at half the rate.
    """
    alpha = hp.alpha
    value = objective_value(net, dataset, pairs, hp)
    _check_finite(value.j_total, 0, "objective")
    history = [value]
    alphas = []
    change = math.inf
    converged = change <= hp.tol
    it = 0
    while not converged and it < hp.max_iters:
        grad = grad_total(net, dataset, pairs, hp, mode=mode, threads=threads, reproducible=reproducible)
        if not grad.is_finite():
            raise NumericError(f"non-finite gradient at iteration {it + 1}", iteration=it + 1)
        while True:
            candidate = sgd_step(net, grad, alpha) if _finite_step(net, grad, alpha) else None
            new_value = None
            if candidate is not None:
                # a diverging step may overflow; the finiteness check below reports it
                with np.errstate(over="ignore", invalid="ignore"):
                    new_value = objective_value(candidate, dataset, pairs, hp)
            ok = new_value is not None and math.isfinite(new_value.j_total)
            if halve_on_increase and (not ok or new_value.j_total > value.j_total) and alpha > 1e-12:
                alpha *= 0.5
                continue
            break
        if not ok:
            raise NumericError(f"non-finite objective at iteration {it + 1}", iteration=it + 1)
        it += 1
        change = relative_change(value.j_total, new_value.j_total)
        net, value = candidate, new_value
        history.append(value)
        alphas.append(alpha)
        if callback is not None:
            callback(it, value)
        converged = change <= hp.tol
    log.debug("trained %d iterations, J=%.6g, converged=%s", it, value.j_total, converged)
    return TrainReport(history, net, it, converged, seed, alphas)


def _finite_step(net, grad, alpha) -> bool:
    with np.errstate(over="ignore", invalid="ignore"):
        return all(np.all(np.isfinite(W - alpha * dW)) for W, dW in zip(net.weights, grad.dW)) and all(
            np.all(np.isfinite(b - alpha * db)) for b, db in zip(net.biases, grad.db)
        )


def _check_finite(v, it, what):
    if not math.isfinite(v):
        raise NumericError(f"non-finite {what} at iteration {it}", iteration=it)


def is_non_increasing(history, slack: float = 0.0) -> bool:
    js = [v.j_total for v in history]
    return all(b <= a + slack * max(1.0, abs(a)) for a, b in zip(js, js[1:]))


def find_descent_rate(net, dataset, pairs, hp: Hyperparams, iters: int, start: float = 0.1, max_halvings: int = 30):
    """Halve the learning rate from ``start`` until ``iters`` steps never raise J.

    Returns ``(alpha, report)``, or ``(None, last_report)`` if no rate in the
    schedule works.
    """
    alpha = start
    report = None
    for _ in range(max_halvings + 1):
        # a fixed point (zero change) is the only way to stop before ``iters``
        trial = Hyperparams.from_lambdas(hp.lambdas, alpha=alpha, max_iters=iters, tol=1e-300)
        report = train(net, dataset, pairs, trial)
        if (report.iterations_run == iters or report.converged) and is_non_increasing(report.history):
            return alpha, report
        alpha *= 0.5
    return None, report


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


def finite_diff_grad(net: Network, dataset, pairs, hp: Hyperparams, h: float = 1e-5) -> GradientBuffer:
    """Central differences of the full objective, one parameter at a time."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    probe = net.copy()

    def J():
        return objective_value(probe, dataset, pairs, hp).j_total

    def diff(arr):
        out = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            plus = J()
            arr[idx] = orig - h
            minus = J()
            arr[idx] = orig
            out[idx] = (plus - minus) / (2 * h)
        return out

    return GradientBuffer([diff(W) for W in probe.weights], [diff(b) for b in probe.biases])


def max_relative_error(analytic: GradientBuffer, numeric: GradientBuffer, floor: float = 1e-6):
    """Largest |g - n| / max(|g|, |n|, floor) over all coordinates.

    Returns ``(error, coordinate_name)``.
    """
    g = analytic.flat()
    n = numeric.flat()
    err = np.abs(g - n) / np.maximum(np.maximum(np.abs(g), np.abs(n)), floor)
    i = int(np.argmax(err))
    return float(err[i]), analytic.coordinates()[i]


def norm_relative_error(analytic: GradientBuffer, numeric: GradientBuffer) -> float:
    """||g - n|| / max(||g||, ||n||) over the flattened gradients (0 if both vanish)."""
    g = analytic.flat()
    n = numeric.flat()
    scale = max(np.linalg.norm(g), np.linalg.norm(n))
    return float(np.linalg.norm(g - n) / scale) if scale > 0 else 0.0
