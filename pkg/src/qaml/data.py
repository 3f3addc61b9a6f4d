"""Dataset ingestion, PCA reduction, range scaling, and triplet mining.

The Iris table ships inside the package; MNIST-style data is read from
user-supplied IDX files (big-endian magic + dimensions + raw bytes).
Preprocessing order is fixed: optional PCA fit on the training split only,
then per-feature affine scaling of the training range onto [-1, 1] with
the test split mapped by the training constants and clamped.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from ._iris_data import IRIS_CLASS_NAMES, IRIS_ROWS
from .embedding import Sample, Triplet
from .kernels import jacobi_eigh

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Bad dataset request: unknown class, oversubscribed split, ..."""


class IdxFormatError(ValueError):
    """IDX file violates the format: magic, counts, or truncation."""


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    test: tuple
    class_names: dict

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        dims = {s.dim for s in self.train + self.test}
        if len(dims) > 1:
            raise DataError("inconsistent feature dimensions in split")

    @property
    def feature_dim(self) -> int:
        return self.train[0].dim if self.train else 0


# ---------------------------------------------------------------------------
# Iris
# ---------------------------------------------------------------------------

def iris_table():
    """The embedded 150 x 4 table as (features array, label array)."""
    rows = np.asarray([r[:4] for r in IRIS_ROWS], dtype=np.float64)
    labels = np.asarray([r[4] for r in IRIS_ROWS], dtype=np.int64)
    return rows, labels


def load_iris(classes=(2, 3), train_per_class: int = 30, seed: int = 0) -> DatasetSplit:
    """Seeded two-class split of the embedded Iris table.

    Classes use the 1..3 numbering of the table rows (1: rows 0-49,
    2: rows 50-99, 3: rows 100-149).  Each class contributes
    ``train_per_class`` training samples; the rest of its 50 rows become
    test samples.  Features are raw measurements; scale before encoding.
    """
    rows, labels = iris_table()
    classes = tuple(classes)
    if len(classes) != 2 or any(c not in (1, 2, 3) for c in classes):
        raise DataError(f"classes must be two of 1, 2, 3; got {classes}")
    if classes[0] == classes[1]:
        raise DataError("the two classes must differ")
    if not 1 <= train_per_class <= 50:
        raise DataError("train_per_class must lie in [1, 50]")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        order = rng.permutation(idx)
        for i in order[:train_per_class]:
            train.append((rows[i], c))
        for i in order[train_per_class:]:
            test.append((rows[i], c))
    names = {c: IRIS_CLASS_NAMES[c] for c in classes}
    make = lambda pairs: tuple(_raw_sample(f, c) for f, c in pairs)
    return DatasetSplit(train=make(train), test=make(test), class_names=names)


class _RawSample(Sample):
    """Sample whose features may still be outside [-1, 1] (pre-scaling)."""

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if feats.ndim != 1 or feats.size == 0:
            raise DataError("features must be a nonempty 1-D vector")


def _raw_sample(features, label):
    return _RawSample(np.asarray(features, dtype=np.float64), label)


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


def parse_idx_images(path) -> np.ndarray:
    """Images from an IDX file as float64 in [0, 1], shape (count, rows*cols)."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise IdxFormatError(f"truncated IDX image header in {path}")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(
                f"bad image magic 0x{magic:08x} (expected 0x{IDX_IMAGE_MAGIC:08x}) in {path}"
            )
        data = fh.read(count * rows * cols)
    if len(data) != count * rows * cols:
        raise IdxFormatError(f"truncated IDX image payload in {path}")
    pixels = np.frombuffer(data, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(count, rows * cols)


def parse_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise IdxFormatError(f"truncated IDX label header in {path}")
        magic, count = struct.unpack(">II", header)
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(
                f"bad label magic 0x{magic:08x} (expected 0x{IDX_LABEL_MAGIC:08x}) in {path}"
            )
        data = fh.read(count)
    if len(data) != count:
        raise IdxFormatError(f"truncated IDX label payload in {path}")
    return np.frombuffer(data, dtype=np.uint8).astype(np.int64)


def load_mnist_idx(
    image_path,
    label_path,
    classes=(0, 1),
    per_class_train: int = 50,
    per_class_test: int = 50,
    seed: int = 0,
) -> DatasetSplit:
    """Two-class seeded subsample of an IDX image/label pair.

    Pixels are scaled to [0, 1]; PCA and range scaling happen later in
    ``preprocess``.  Train and test subsets are disjoint by construction.
    """
    images = parse_idx_images(image_path)
    labels = parse_idx_labels(label_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}"
        )
    classes = tuple(classes)
    if len(classes) != 2 or classes[0] == classes[1]:
        raise DataError("need two distinct classes")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        need = per_class_train + per_class_test
        if idx.size < need:
            raise DataError(f"class {c} has {idx.size} samples, need {need}")
        order = rng.permutation(idx)
        for i in order[:per_class_train]:
            train.append((images[i], int(c)))
        for i in order[per_class_train:need]:
            test.append((images[i], int(c)))
    names = {int(c): str(c) for c in classes}
    return DatasetSplit(
        train=tuple(_raw_sample(f, c) for f, c in train),
        test=tuple(_raw_sample(f, c) for f, c in test),
        class_names=names,
    )


# ---------------------------------------------------------------------------
# PCA (in-repo Jacobi eigensolver)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus top-k orthonormal components, variances descending."""

    mean: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)  # k x D, rows orthonormal
    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("mean", "components", "variances"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        gram = self.components @ self.components.T
        if np.max(np.abs(gram - np.eye(self.components.shape[0]))) > 1e-8:
            raise DataError("PCA components are not orthonormal")
        if np.any(np.diff(self.variances) > 1e-12) or np.any(self.variances < -1e-12):
            raise DataError("variances must be nonincreasing and nonnegative")


def pca_fit(X, k: int) -> PcaModel:
    """Top-k PCA of the rows of X via the cyclic Jacobi eigensolver.

    Sign convention: the largest-magnitude entry of each component is
    positive, which makes the decomposition deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least two samples")
    if not 1 <= k <= X.shape[1]:
        raise DataError(f"k={k} outside [1, {X.shape[1]}]")
    mean = X.mean(axis=0)
    centered = X - mean
    if np.allclose(centered, 0.0):
        raise DataError("degenerate data: all samples identical")
    cov = centered.T @ centered / (X.shape[0] - 1)
    evals, evecs = jacobi_eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    components = evecs[:, order].T.copy()
    variances = np.maximum(evals[order], 0.0)
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, variances=variances)


def pca_apply(model: PcaModel, x) -> np.ndarray:
    """Project one vector (or a matrix of rows) onto the components."""
    x = np.asarray(x, dtype=np.float64)
    return (x - model.mean) @ model.components.T


# ---------------------------------------------------------------------------
# range scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RangeScaler:
    """Per-feature affine map sending the fitted min/max to -1/+1."""

    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)

    @classmethod
    def fit(cls, X) -> "RangeScaler":
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            raise DataError("cannot fit a scaler on empty data")
        lo, hi = X.min(axis=0), X.max(axis=0)
        constant = hi - lo == 0
        if np.any(constant):
            logger.warning(
                "constant feature(s) %s map to 0 under range scaling",
                np.flatnonzero(constant).tolist(),
            )
        return cls(lo=lo, hi=hi)

    def transform(self, X, clamp: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.hi - self.lo
        safe = np.where(span == 0, 1.0, span)
        out = 2.0 * (X - self.lo) / safe - 1.0
        out = np.where(span == 0, 0.0, out)
        if clamp:
            out = np.clip(out, -1.0, 1.0)
        return out


def scale_to_range(train_X, test_X=None):
    """Scale training rows to [-1, 1]; map test rows with train constants.

    Returns (train_scaled, test_scaled, scaler); test entries outside the
    training range are clamped to the boundary.
    """
    scaler = RangeScaler.fit(train_X)
    train_scaled = scaler.transform(train_X, clamp=True)
    test_scaled = scaler.transform(test_X, clamp=True) if test_X is not None else None
    return train_scaled, test_scaled, scaler


def preprocess(split: DatasetSplit, pca_components: int | None = None) -> DatasetSplit:
    """PCA (optional, fit on train only) then range scaling onto [-1, 1]."""
    train_X = np.array([s.features for s in split.train])
    test_X = np.array([s.features for s in split.test])
    if pca_components is not None:
        model = pca_fit(train_X, pca_components)
        train_X = pca_apply(model, train_X)
        test_X = pca_apply(model, test_X)
    train_X, test_X, _ = scale_to_range(train_X, test_X)
    train = tuple(
        Sample(f, s.label) for f, s in zip(train_X, split.train)
    )
    test = tuple(Sample(f, s.label) for f, s in zip(test_X, split.test))
    return DatasetSplit(train=train, test=test, class_names=dict(split.class_names))


# ---------------------------------------------------------------------------
# triplet mining
# ---------------------------------------------------------------------------

def sample_triplets(split: DatasetSplit, n: int, seed: int | None = None, rng=None):
    """Uniform seeded triplets: anchor, same-class positive (distinct),
    other-class negative."""
    if rng is None:
        rng = np.random.default_rng(seed)
    by_label = {}
    for i, s in enumerate(split.train):
        by_label.setdefault(s.label, []).append(i)
    labels = sorted(by_label, key=repr)
    if len(labels) != 2:
        raise DataError("triplet mining requires exactly two classes")
    for lab in labels:
        if len(by_label[lab]) < 2:
            raise DataError(f"class {lab!r} needs at least two members")
    triplets = []
    for _ in range(n):
        a_lab = labels[int(rng.integers(2))]
        n_lab = labels[1] if a_lab == labels[0] else labels[0]
        pool = by_label[a_lab]
        a_idx = pool[int(rng.integers(len(pool)))]
        while True:
            p_idx = pool[int(rng.integers(len(pool)))]
            if p_idx != a_idx:
                break
        neg_pool = by_label[n_lab]
        n_idx = neg_pool[int(rng.integers(len(neg_pool)))]
        triplets.append(
            Triplet(
                anchor=split.train[a_idx],
                positive=split.train[p_idx],
                negative=split.train[n_idx],
            )
        )
    return triplets


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def export_split_csv(split: DatasetSplit, train_path, test_path) -> None:
    """Write each split as CSV: header row, one sample per line, label last."""
    for samples, path in ((split.train, train_path), (split.test, test_path)):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            dim = samples[0].dim if samples else 0
            writer.writerow([f"f{j}" for j in range(dim)] + ["label"])
            for s in samples:
                writer.writerow([repr(float(v)) for v in s.features] + [s.label])
