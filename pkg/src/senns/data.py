"""Datasets: CSV and IDX loaders, seeded synthetic sets, feature export."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_open
from .errors import (
    EmptyDatasetError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    NonNumericError,
    RaggedRowError,
    ShapeError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_names: list[str] | None = field(default=None)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs.reshape(-1, 1)
        if self.inputs.shape[0] == 0 or self.labels.size == 0:
            raise EmptyDatasetError("dataset has no examples")
        if self.inputs.ndim != 2:
            raise ShapeError("dataset inputs", "2-D array (m, d)", self.inputs.shape)
        if self.labels.shape != (self.inputs.shape[0],):
            raise ShapeError("number of labels", self.inputs.shape[0], self.labels.shape)
        if self.labels.min() < 0:
            raise ValueError("class ids must be non-negative")
        if self.class_names is not None and self.labels.max() >= len(self.class_names):
            raise ValueError("class id without a class name")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("dataset contains non-finite feature values")

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_classes(self) -> int:
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1

    def label_names(self) -> list[str]:
        if self.class_names is None:
            return [str(int(v)) for v in self.labels]
        return [self.class_names[v] for v in self.labels]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.inputs[idx], self.labels[idx], self.class_names)


def densify_labels(raw) -> tuple[np.ndarray, list[str]]:
    """Map label tokens to 0..N-1 in first-appearance order."""
    ids: dict[str, int] = {}
    out = []
    for tok in raw:
        out.append(ids.setdefault(tok, len(ids)))
    return np.array(out, dtype=np.int64), list(ids)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=-1) -> LabeledDataset:
    """Read comma-separated rows; one column holds class labels, the rest are numeric.

    A first row whose feature columns are not all numeric is treated as a
    header, and ``label_column`` may then be given by name.
    """
    with open(path, newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyDatasetError(f"{path}: file has no rows")

    width = len(rows[0][1])
    header = None
    if isinstance(label_column, str) and not _is_int(label_column):
        header = [c.strip() for c in rows[0][1]]
    else:
        col = _resolve_column(int(label_column), width, rows[0][0])
        first = [c.strip() for j, c in enumerate(rows[0][1]) if j != col]
        if not all(_is_number(c) for c in first):
            header = [c.strip() for c in rows[0][1]]
    if header is not None:
        rows = rows[1:]
        if isinstance(label_column, str) and not _is_int(label_column):
            if label_column not in header:
                raise NonNumericError(f"label column {label_column!r} not in header {header}", line=1)
            col = header.index(label_column)
        else:
            col = _resolve_column(int(label_column), width, 1)
    if not rows:
        raise EmptyDatasetError(f"{path}: file has a header but no data rows")

    feats, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise RaggedRowError(f"row has {len(row)} columns, expected {width}", line=lineno)
        vals = []
        for j, tok in enumerate(row):
            if j == col:
                continue
            try:
                vals.append(float(tok))
            except ValueError:
                raise NonNumericError(f"column {j + 1}: non-numeric feature {tok.strip()!r}", line=lineno) from None
        feats.append(vals)
        raw_labels.append(row[col].strip())
    labels, names = densify_labels(raw_labels)
    return LabeledDataset(np.array(feats, dtype=np.float64).reshape(len(feats), width - 1), labels, names)


def _is_int(value) -> bool:
    try:
        int(value)
    except (TypeError, ValueError):
        return False
    return True


def _resolve_column(col: int, width: int, line: int) -> int:
    if not -width <= col < width:
        raise RaggedRowError(f"label column {col} out of range for {width} columns", line=line)
    return col % width


def export_csv(dataset: LabeledDataset, path, header: bool = True) -> None:
    with atomic_open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"x{j}" for j in range(dataset.dim)] + ["label"])
        for x, name in zip(dataset.inputs, dataset.label_names()):
            w.writerow([repr(float(v)) for v in x] + [name])


def export_features(net, dataset: LabeledDataset, path) -> None:
    """Write one row per example: the network's output activations, then the label."""
    from .network import predict

    if dataset.dim != net.n_inputs:
        raise ShapeError("dataset dimension vs model input size", net.n_inputs, dataset.dim)
    feats = predict(net, dataset.inputs)
    export_csv(LabeledDataset(feats, dataset.labels, dataset.class_names), path)


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------


def _read_idx_header(buf: bytes, magic: int, ndims: int, path) -> tuple[int, ...]:
    if len(buf) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than the magic number")
    (found,) = struct.unpack(">I", buf[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    end = 4 + 4 * ndims
    if len(buf) < end:
        raise IdxTruncatedError(f"{path}: header truncated")
    return struct.unpack(f">{ndims}I", buf[4:end])


def load_idx(images_path, labels_path, limit: int | None = None) -> LabeledDataset:
    """Read an IDX3 image file and IDX1 label file; pixels are scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        img_buf = fh.read()
    with open(labels_path, "rb") as fh:
        lab_buf = fh.read()
    n_img, rows, cols = _read_idx_header(img_buf, IDX_IMAGES_MAGIC, 3, images_path)
    (n_lab,) = _read_idx_header(lab_buf, IDX_LABELS_MAGIC, 1, labels_path)
    if n_img != n_lab:
        raise IdxCountMismatchError(f"{n_img} images but {n_lab} labels")
    if n_img == 0:
        raise EmptyDatasetError(f"{images_path}: no images")
    size = rows * cols
    if len(img_buf) < 16 + n_img * size:
        raise IdxTruncatedError(f"{images_path}: expected {n_img * size} pixel bytes, found {len(img_buf) - 16}")
    if len(lab_buf) < 8 + n_lab:
        raise IdxTruncatedError(f"{labels_path}: expected {n_lab} label bytes, found {len(lab_buf) - 8}")
    n = n_img if limit is None else max(0, min(int(limit), n_img))
    if n == 0:
        raise EmptyDatasetError("limit selects no examples")
    pixels = np.frombuffer(img_buf, dtype=np.uint8, count=n * size, offset=16).reshape(n, size)
    raw = np.frombuffer(lab_buf, dtype=np.uint8, count=n, offset=8)
    values = np.unique(raw)
    labels = np.searchsorted(values, raw)
    return LabeledDataset(pixels.astype(np.float64) / 255.0, labels, [str(int(v)) for v in values])


def write_idx(images_path, labels_path, images, labels) -> None:
    """Write uint8 images (n, rows, cols) and labels (n,) as an IDX3/IDX1 pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ShapeError("IDX images", "(n, rows, cols)", images.shape)
    with atomic_open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with atomic_open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


# ---------------------------------------------------------------------------
# synthetic sets and preprocessing
# ---------------------------------------------------------------------------


def make_gaussians(n_per_class, centers, sigma: float = 1.0, seed: int = 0) -> LabeledDataset:
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if np.isscalar(n_per_class):
        n_per_class = [int(n_per_class)] * centers.shape[0]
    if any(n <= 0 for n in n_per_class):
        raise ValueError("every class needs a positive number of points")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c, (center, n) in enumerate(zip(centers, n_per_class)):
        xs.append(center + sigma * rng.standard_normal((n, centers.shape[1])))
        ys.append(np.full(n, c))
    return LabeledDataset(np.vstack(xs), np.concatenate(ys), [str(c) for c in range(centers.shape[0])])


def make_two_moons(n: int = 100, noise: float = 0.1, seed: int = 0) -> LabeledDataset:
    """Two interleaving half circles; the first class gets the extra point when n is odd."""
    if n < 2:
        raise ValueError("two moons needs at least 2 points")
    rng = np.random.default_rng(seed)
    n_a = (n + 1) // 2
    n_b = n - n_a
    ta = np.linspace(0.0, np.pi, n_a)
    tb = np.linspace(0.0, np.pi, n_b)
    a = np.column_stack([np.cos(ta), np.sin(ta)])
    b = np.column_stack([1.0 - np.cos(tb), 0.5 - np.sin(tb)])
    X = np.vstack([a, b]) + noise * rng.standard_normal((n, 2))
    y = np.concatenate([np.zeros(n_a, dtype=np.int64), np.ones(n_b, dtype=np.int64)])
    return LabeledDataset(X, y, ["0", "1"])


def standardize(dataset: LabeledDataset, stats=None, scale: float = 1.0):
    """Per-feature zero mean and standard deviation ``scale``.

    Constant features are only centered. Returns ``(dataset, (mean, divisor))``
    so test data can reuse the training stats.
    """
    if stats is None:
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        mean = dataset.inputs.mean(axis=0)
        std = dataset.inputs.std(axis=0)
        std = np.where(std > 0, std, 1.0) / scale
    else:
        mean, std = stats
    return LabeledDataset((dataset.inputs - mean) / std, dataset.labels, dataset.class_names), (mean, std)


def load_dataset(spec: dict) -> LabeledDataset:
    """Build a dataset from a source description (as used by the CLI)."""
    kind = spec.get("source")
    if kind == "csv":
        ds = load_csv(spec["path"], spec.get("label_column", -1))
    elif kind == "idx":
        ds = load_idx(spec["images"], spec["labels"], spec.get("limit"))
    elif kind == "gaussians":
        n_classes = int(spec.get("classes", 2))
        dim = int(spec.get("dim", 2))
        spread = float(spec.get("spread", 3.0))
        centers = np.zeros((n_classes, dim))
        for c in range(n_classes):
            angle = 2 * np.pi * c / n_classes
            centers[c, 0] = spread * np.cos(angle)
            if dim > 1:
                centers[c, 1] = spread * np.sin(angle)
        ds = make_gaussians(int(spec.get("n", 20)), centers, float(spec.get("sigma", 1.0)), int(spec.get("seed", 0)))
    elif kind == "moons":
        ds = make_two_moons(int(spec.get("n", 100)), float(spec.get("noise", 0.1)), int(spec.get("seed", 0)))
    else:
        raise ValueError(f"unknown dataset source {kind!r}")
    if spec.get("standardize"):
        ds, _ = standardize(ds, scale=float(spec.get("scale", 1.0)))
    return ds
