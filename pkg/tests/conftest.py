"""Shared oracles for the test suite.

Everything here is written independently of the package internals: a
straight-line forward pass, central differences of arbitrary scalar
functions, and a double-loop objective with the class tests inlined.
"""

import gzip
import importlib.resources
import os

import numpy as np
import pytest

from senns.backprop import GradientBuffer
from senns.network import Network


def ref_transfer(kind, z):
    name = getattr(kind, "value", kind)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    return z


def ref_forward(net: Network, x):
    """Plain per-unit loops; slow on purpose."""
    a = [float(v) for v in x]
    for W, b, kind in zip(net.weights, net.biases, net.transfer):
        nxt = []
        for i in range(W.shape[0]):
            z = b[i]
            for j in range(W.shape[1]):
                z += W[i, j] * a[j]
            nxt.append(ref_transfer(kind, z))
        a = nxt
    return np.array(a)


def numeric_grad(net: Network, fn, h=1e-5, order=2) -> GradientBuffer:
    """Central differences of ``fn(net)`` for every weight and bias.

    ``order=4`` uses the five-point stencil, which tolerates a larger ``h`` and
    so keeps roundoff well below the comparison floor.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    probe = net.copy()

    def at(arr, idx, orig, step):
        arr[idx] = orig + step
        return fn(probe)

    def diff(arr):
        out = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            if order == 2:
                out[idx] = (at(arr, idx, orig, h) - at(arr, idx, orig, -h)) / (2 * h)
            else:
                out[idx] = (
                    -at(arr, idx, orig, 2 * h) + 8 * at(arr, idx, orig, h) - 8 * at(arr, idx, orig, -h) + at(arr, idx, orig, -2 * h)
                ) / (12 * h)
            arr[idx] = orig
        return out

    return GradientBuffer([diff(W) for W in probe.weights], [diff(b) for b in probe.biases])


def brute_force_objective(net, inputs, labels, pair_iter, lambdas, m_c=None, m_d=None):
    """J with the class tests and weights written out per pair.

    ``pair_iter`` yields (t, u). M_C and M_D default to counts over all m^2
    ordered pairs.
    """
    l1, l2, l3, l4 = lambdas
    m = len(labels)
    outs = [ref_forward(net, x) for x in inputs]
    if m_c is None or m_d is None:
        m_c = m_d = 0
        for t in range(m):
            for u in range(m):
                if labels[t] == labels[u]:
                    m_c += 1
                else:
                    m_d += 1
    j1 = 0.0
    for t, u in pair_iter:
        if labels[t] == labels[u]:
            s = l1 / m_c
        else:
            s = -l2 / m_d
        d = outs[t] - outs[u]
        j1 += 0.5 * s * float(d @ d)
    j2 = l3 / m * sum(float(np.sum(np.abs(o))) for o in outs)
    j3 = 0.5 * l4 * sum(float(np.sum(W**2)) for W in net.weights)
    return j1, j2, j3


def random_lambdas(rng):
    v = rng.uniform(0.05, 1.0, size=4)
    return tuple(v / v.sum())


MNIST_ENV = "SENNS_MNIST_DIR"


def mnist_arrays():
    """(images uint8 (n,28,28), labels uint8) from real IDX files or the bundled 5k sample.

    Set SENNS_MNIST_DIR to a directory holding the standard
    ``train-images-idx3-ubyte``/``train-labels-idx1-ubyte`` files to use them;
    otherwise the 5000-digit CSV shipped inside the mlxtend wheel is used.
    """
    root = os.environ.get(MNIST_ENV)
    if root:
        from senns.data import load_idx

        ds = load_idx(os.path.join(root, "train-images-idx3-ubyte"), os.path.join(root, "train-labels-idx1-ubyte"))
        imgs = np.rint(ds.inputs * 255).astype(np.uint8).reshape(-1, 28, 28)
        return imgs, np.array([int(n) for n in ds.label_names()], dtype=np.uint8)
    try:
        res = importlib.resources.files("mlxtend") / "data" / "data" / "mnist_5k.csv.gz"
    except ModuleNotFoundError:
        pytest.skip(f"no MNIST source: install mlxtend or set {MNIST_ENV}")
    with res.open("rb") as fh, gzip.open(fh, "rt") as text:
        raw = np.loadtxt(text, delimiter=",")
    return raw[:, :-1].astype(np.uint8).reshape(-1, 28, 28), raw[:, -1].astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
