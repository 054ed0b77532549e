"""Dense feedforward network: parameters, forward pass and the model file format.

Weights follow the ``W[l][i, j]`` convention: entry ``(i, j)`` connects unit
``j`` of layer ``l`` to unit ``i`` of layer ``l + 1``, so ``W[l]`` has shape
``(s[l+1], s[l])``. Inputs may be a single vector or a 2-D array whose rows
are examples; every quantity in the resulting trace then carries the same
leading batch axis.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ModelShapeError,
    ModelTruncatedError,
    ModelVersionError,
    ShapeError,
)

MAGIC = "SENNS-MODEL v1"


class TransferKind(enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    LINEAR = "linear"

    def f(self, z):
        if self is TransferKind.SIGMOID:
            # tanh form avoids overflow in exp for large |z|
            return 0.5 * (1.0 + np.tanh(0.5 * z))
        if self is TransferKind.TANH:
            return np.tanh(z)
        return np.asarray(z, dtype=np.float64).copy()

    def fprime(self, z):
        if self is TransferKind.SIGMOID:
            s = 0.5 * (1.0 + np.tanh(0.5 * z))
            return s * (1.0 - s)
        if self is TransferKind.TANH:
            t = np.tanh(z)
            return 1.0 - t * t
        return np.ones_like(z, dtype=np.float64)

    @classmethod
    def parse(cls, value) -> "TransferKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown transfer kind {value!r}; expected sigmoid, tanh or linear"
            ) from None


@dataclass
class Network:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    transfer: list[TransferKind]

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        self.transfer = [TransferKind.parse(k) for k in self.transfer]
        _validate_sizes(self.layer_sizes)
        n = len(self.layer_sizes) - 1
        if not (len(self.weights) == len(self.biases) == len(self.transfer) == n):
            raise ShapeError(
                "parameter list lengths (weights, biases, transfer)",
                (n, n, n),
                (len(self.weights), len(self.biases), len(self.transfer)),
            )
        for l in range(n):
            want = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if self.weights[l].shape != want:
                raise ShapeError(f"W[{l + 1}] shape", want, self.weights[l].shape)
            if self.biases[l].shape != (want[0],):
                raise ShapeError(f"b[{l + 1}] shape", (want[0],), self.biases[l].shape)
            if not (np.all(np.isfinite(self.weights[l])) and np.all(np.isfinite(self.biases[l]))):
                raise ValueError(f"non-finite parameter in layer {l + 1}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Network":
        return Network(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.transfer),
        )

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class ForwardTrace:
    """Pre-activations ``z`` (layers 2..n) and activations ``a`` (layers 1..n)."""

    z: list[np.ndarray] = field(default_factory=list)
    a: list[np.ndarray] = field(default_factory=list)

    @property
    def batched(self) -> bool:
        return self.a[0].ndim == 2


def _validate_sizes(layer_sizes):
    if len(layer_sizes) < 2:
        raise ValueError(f"a network needs at least 2 layers, got {len(layer_sizes)}")
    for i, s in enumerate(layer_sizes):
        if s <= 0:
            raise ValueError(f"layer {i + 1} has size {s}; sizes must be positive")


def default_transfer(n_layers: int) -> list[TransferKind]:
    """Tanh on hidden layers, linear on the output layer."""
    return [TransferKind.TANH] * (n_layers - 2) + [TransferKind.LINEAR]


def forward(net: Network, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.n_inputs:
        raise ShapeError("input length", net.n_inputs, x.shape[-1] if x.ndim else x.shape)
    a = [x]
    z = []
    for W, b, kind in zip(net.weights, net.biases, net.transfer):
        zl = a[-1] @ W.T + b
        z.append(zl)
        a.append(kind.f(zl))
    return ForwardTrace(z=z, a=a)


def output_activations(trace: ForwardTrace) -> np.ndarray:
    return trace.a[-1]


def predict(net: Network, X) -> np.ndarray:
    """Output-layer activations for a batch of inputs (rows)."""
    return output_activations(forward(net, np.atleast_2d(X)))


def init_random(layer_sizes, transfer=None, seed: int = 0) -> Network:
    """Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    layer_sizes = [int(s) for s in layer_sizes]
    _validate_sizes(layer_sizes)
    if transfer is None:
        transfer = default_transfer(len(layer_sizes))
    elif isinstance(transfer, (str, TransferKind)):
        transfer = [transfer] * (len(layer_sizes) - 1)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        r = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(layer_sizes, weights, biases, list(transfer))


# ---------------------------------------------------------------------------
# model file format
# ---------------------------------------------------------------------------


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def serialize(net: Network) -> bytes:
    out = io.StringIO()
    out.write(MAGIC + "\n")
    out.write(" ".join(str(s) for s in net.layer_sizes) + "\n")
    out.write(" ".join(k.value for k in net.transfer) + "\n")
    for l, (W, b) in enumerate(zip(net.weights, net.biases), start=1):
        out.write(f"W {l}\n")
        for row in W:
            out.write(_fmt(row) + "\n")
        out.write(f"b {l}\n")
        out.write(_fmt(b) + "\n")
    return out.getvalue().encode("ascii")


def deserialize(data) -> Network:
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise ModelVersionError(f"model stream is not ASCII text: {exc}") from None
    lines = [ln.strip() for ln in data.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise ModelTruncatedError(f"model stream ends before {what} (line {pos + 1})")
        line = lines[pos]
        pos += 1
        return line

    def numbers(what, count):
        line = take(what)
        try:
            vals = [float(tok) for tok in line.split()]
        except ValueError:
            raise ModelShapeError(f"line {pos}: non-numeric entry in {what}") from None
        if len(vals) != count:
            raise ModelShapeError(f"line {pos}: {what} has {len(vals)} values, expected {count}")
        return vals

    if not lines or lines[0] != MAGIC:
        found = lines[0] if lines else "<empty>"
        raise ModelVersionError(f"bad model header {found!r}; expected {MAGIC!r}")
    pos = 1
    try:
        sizes = [int(tok) for tok in take("layer sizes").split()]
    except ValueError:
        raise ModelShapeError("line 2: layer sizes must be integers") from None
    try:
        _validate_sizes(sizes)
    except ValueError as exc:
        raise ModelShapeError(f"line 2: {exc}") from None
    try:
        kinds = [TransferKind.parse(tok) for tok in take("transfer kinds").split()]
    except ValueError as exc:
        raise ModelShapeError(f"line 3: {exc}") from None
    if len(kinds) != len(sizes) - 1:
        raise ModelShapeError(
            f"line 3: {len(kinds)} transfer kinds for {len(sizes) - 1} non-input layers"
        )
    weights, biases = [], []
    for l in range(1, len(sizes)):
        tag = take(f"'W {l}'")
        if tag != f"W {l}":
            raise ModelShapeError(f"line {pos}: expected 'W {l}', found {tag!r}")
        W = [numbers(f"row {i + 1} of W {l}", sizes[l - 1]) for i in range(sizes[l])]
        tag = take(f"'b {l}'")
        if tag != f"b {l}":
            raise ModelShapeError(f"line {pos}: expected 'b {l}', found {tag!r}")
        b = numbers(f"b {l}", sizes[l])
        weights.append(np.array(W, dtype=np.float64).reshape(sizes[l], sizes[l - 1]))
        biases.append(np.array(b, dtype=np.float64))
    if pos != len(lines):
        raise ModelShapeError(f"line {pos + 1}: unexpected trailing content")
    try:
        return Network(sizes, weights, biases, kinds)
    except ValueError as exc:
        raise ModelShapeError(str(exc)) from None


def save(net: Network, path) -> None:
    from ._io import atomic_write_bytes

    atomic_write_bytes(path, serialize(net))


def load(path) -> Network:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
