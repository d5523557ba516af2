"""Dataset ingestion and batching.

Covers the IDX image/label file format (big-endian, magic 2051/2049),
class-balanced reduction, seeded epoch shuffling, and two synthetic
generators: a noisy linear-map dataset used as a ground-truth oracle for
the least-squares machinery, and a 28x28 glyph corpus that stands in for
real digit data on machines where none is installed.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import gaussian_filter

from .errors import (
    IdxFormatError,
    InsufficientDataError,
    ShapeError,
    StateError,
    TargetError,
)
from .linalg import as_matrix

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
MNIST_CLASSES = 10


@dataclass
class Dataset:
    """Inputs with optional one-hot targets.

    ``targets is None`` marks an unlabeled dataset. ``one_hot=False``
    relaxes target validation for regression-style synthetic data; the
    classification loaders always produce strict one-hot targets.
    """

    inputs: NDArray[np.float64]  # (m, n)
    targets: NDArray[np.float64] | None  # (m, c) or None
    class_count: int
    one_hot: bool = True

    def __post_init__(self):
        self.inputs = as_matrix(self.inputs)
        if not np.all(np.isfinite(self.inputs)):
            raise ShapeError("dataset inputs must be finite")
        if self.targets is not None:
            self.targets = as_matrix(self.targets)
            if self.targets.shape[0] != self.inputs.shape[0]:
                raise ShapeError(
                    f"{self.inputs.shape[0]} inputs vs {self.targets.shape[0]} targets"
                )
            if self.targets.shape[1] != self.class_count:
                raise ShapeError(
                    f"targets have {self.targets.shape[1]} columns, "
                    f"expected {self.class_count}"
                )
            if self.one_hot and (
                not np.all((self.targets == 0.0) | (self.targets == 1.0))
                or not np.all(self.targets.sum(axis=1) == 1.0)
            ):
                raise TargetError("every target row must be one-hot")

    @property
    def sample_count(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def labeled(self) -> bool:
        return self.targets is not None

    def labels(self) -> NDArray[np.int64]:
        """Integer class per row (argmax of the one-hot targets)."""
        if self.targets is None:
            raise StateError("dataset is unlabeled")
        return np.argmax(self.targets, axis=1)


@dataclass
class BatchPlan:
    batch_size: int
    shuffle_seed: int = 0
    drop_last: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ShapeError(f"batch_size must be >= 1, got {self.batch_size}")


def _open_maybe_gz(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def _read_exact(f, count, path, what):
    data = f.read(count)
    if len(data) != count:
        raise IdxFormatError(f"{path}: truncated while reading {what}")
    return data


def load_idx_images(path) -> NDArray[np.uint8]:
    """Raw (count, rows, cols) uint8 pixels from an IDX image file."""
    with _open_maybe_gz(path) as f:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, path, "image header")
        )
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(f"{path}: bad image magic {magic} (want {IMAGE_MAGIC})")
        raw = _read_exact(f, count * rows * cols, path, f"{count} images")
    return np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols)


def load_idx_labels(path) -> NDArray[np.uint8]:
    """Raw (count,) uint8 labels from an IDX label file."""
    with _open_maybe_gz(path) as f:
        magic, count = struct.unpack(">II", _read_exact(f, 8, path, "label header"))
        if magic != LABEL_MAGIC:
            raise IdxFormatError(f"{path}: bad label magic {magic} (want {LABEL_MAGIC})")
        raw = _read_exact(f, count, path, f"{count} labels")
    return np.frombuffer(raw, dtype=np.uint8)


def load_idx(images_path, labels_path, scaling: str = "unit") -> Dataset:
    """Parse a matched IDX image/label pair into a flattened Dataset.

    Pixels are divided by 255 under ``scaling="unit"`` and kept as raw
    0..255 values under ``scaling="raw"``. Labels become one-hot rows over
    10 classes; images flatten row-major to rows*cols columns.
    """
    if scaling not in ("unit", "raw"):
        raise ShapeError(f"scaling must be 'unit' or 'raw', got {scaling!r}")
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    if np.any(labels >= MNIST_CLASSES):
        raise IdxFormatError(
            f"{labels_path}: label {int(labels.max())} out of range 0..9"
        )
    inputs = images.reshape(images.shape[0], -1).astype(np.float64)
    if scaling == "unit":
        inputs /= 255.0
    targets = np.eye(MNIST_CLASSES)[labels]
    return Dataset(inputs=inputs, targets=targets, class_count=MNIST_CLASSES)


def write_idx(images: NDArray[np.uint8], labels, images_path, labels_path) -> None:
    """Write uint8 images (m, rows, cols) and labels (m,) as an IDX pair.

    The mirror of :func:`load_idx`; handy for fabricating test corpora.
    """
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise ShapeError("need images (m, rows, cols) and labels (m,)")
    m, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, m, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, m))
        f.write(labels.tobytes())


def reduce_dataset(d: Dataset, per_class: int, seed=0) -> Dataset:
    """Class-balanced random subsample: ``per_class`` rows from every class.

    Sampling is without replacement and deterministic under the seed; the
    result is shuffled so classes are not grouped.
    """
    if not d.labeled:
        raise StateError("cannot reduce an unlabeled dataset by class")
    if per_class < 1:
        raise InsufficientDataError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    labels = d.labels()
    chosen = []
    for c in range(d.class_count):
        members = np.flatnonzero(labels == c)
        if members.size < per_class:
            raise InsufficientDataError(
                f"class {c} has {members.size} samples, need {per_class}"
            )
        chosen.append(rng.choice(members, size=per_class, replace=False))
    order = rng.permutation(np.concatenate(chosen))
    return Dataset(
        inputs=d.inputs[order],
        targets=d.targets[order],
        class_count=d.class_count,
        one_hot=d.one_hot,
    )


def batches(d: Dataset, plan: BatchPlan, epoch: int = 0):
    """Yield disjoint (inputs, targets-or-None) batches covering the dataset.

    The row order is a permutation keyed on (shuffle_seed, epoch), so each
    epoch sees a different but reproducible order. A final short batch is
    kept unless ``drop_last``.
    """
    m = d.sample_count
    if plan.batch_size > m:
        raise ShapeError(f"batch_size {plan.batch_size} exceeds dataset size {m}")
    order = np.random.default_rng([plan.shuffle_seed, epoch]).permutation(m)
    for start in range(0, m, plan.batch_size):
        idx = order[start : start + plan.batch_size]
        if plan.drop_last and idx.size < plan.batch_size:
            return
        yield d.inputs[idx], None if d.targets is None else d.targets[idx]


def synthetic_linear(m: int, n: int, c: int, noise_sd: float, seed=0):
    """Dataset whose targets are a noisy linear map of ones-augmented inputs.

    Returns ``(dataset, true_map)`` where ``true_map`` has shape (n+1, c),
    so tests can verify that the least-squares solvers recover it. The
    targets are continuous, hence ``one_hot=False``.
    """
    if m < 1 or n < 1 or c < 1:
        raise ShapeError("m, n, c must all be positive")
    rng = np.random.default_rng(seed)
    true_map = rng.standard_normal((n + 1, c))
    inputs = rng.standard_normal((m, n))
    clean = np.hstack([inputs, np.ones((m, 1))]) @ true_map
    noisy = clean + noise_sd * rng.standard_normal((m, c)) if noise_sd > 0 else clean
    return (
        Dataset(inputs=inputs, targets=noisy, class_count=c, one_hot=False),
        true_map,
    )


# --- synthetic glyph corpus -------------------------------------------------
#
# A stand-in for handwritten-digit data: each class owns a few smoothed
# random 28x28 templates; a sample blends them with random convex weights
# (continuous within-class variation, like writing styles), shifts the
# result by a few pixels, and adds smoothed plus per-pixel noise. The
# parameters below are calibrated so a small dense network lands in the
# high 90s test accuracy after a few dozen epochs -- hard enough that
# training takes real work, easy enough that it is quick and stable.

GLYPH_SIDE = 28
GLYPH_VARIANTS = 4
GLYPH_MAX_SHIFT = 5
GLYPH_FIELD_NOISE = 0.40
GLYPH_PIXEL_NOISE = 0.15


def _glyph_templates(class_count: int, seed) -> NDArray[np.float64]:
    rng = np.random.default_rng([seed, 1])
    templates = np.empty((class_count, GLYPH_VARIANTS, GLYPH_SIDE, GLYPH_SIDE))
    for c in range(class_count):
        base = gaussian_filter(rng.standard_normal((GLYPH_SIDE, GLYPH_SIDE)), 3.0)
        for v in range(GLYPH_VARIANTS):
            variant = base + 0.45 * gaussian_filter(
                rng.standard_normal((GLYPH_SIDE, GLYPH_SIDE)), 2.0
            )
            lo, hi = variant.min(), variant.max()
            templates[c, v] = (variant - lo) / (hi - lo)
    return templates


def synthetic_glyphs(
    per_class: int, seed=0, split: int = 0, class_count: int = MNIST_CLASSES
):
    """Deterministic 28x28 glyph images: (images uint8 (m,28,28), labels (m,)).

    Class templates depend only on ``seed``; the sample draws also depend on
    ``split``, so train (split 0) and test (split 1) share classes but not
    noise. Rows are interleaved across classes, so any prefix is roughly
    class-balanced.
    """
    templates = _glyph_templates(class_count, seed)
    rng = np.random.default_rng([seed, 2, split])
    m = per_class * class_count
    labels = np.tile(np.arange(class_count, dtype=np.uint8), per_class)
    blends = rng.dirichlet(np.ones(GLYPH_VARIANTS), size=m)
    shifts = rng.integers(-GLYPH_MAX_SHIFT, GLYPH_MAX_SHIFT + 1, size=(m, 2))
    images = np.empty((m, GLYPH_SIDE, GLYPH_SIDE), dtype=np.uint8)
    for i in range(m):
        img = np.tensordot(blends[i], templates[labels[i]], axes=1)
        img = np.roll(img, (shifts[i, 0], shifts[i, 1]), axis=(0, 1))
        img = img + GLYPH_FIELD_NOISE * gaussian_filter(
            rng.standard_normal((GLYPH_SIDE, GLYPH_SIDE)), 2.0
        )
        img = img + GLYPH_PIXEL_NOISE * rng.standard_normal((GLYPH_SIDE, GLYPH_SIDE))
        images[i] = np.clip(img, 0.0, 1.0) * 255.0
    return images, labels


def write_glyph_corpus(out_dir, train_per_class: int, test_per_class: int, seed=0):
    """Write a train/test glyph corpus as four IDX files; returns their paths.

    File names mirror the classic digit-corpus layout, so the same config
    keys work for real and synthetic data.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "images": out / "train-images-idx3-ubyte",
        "labels": out / "train-labels-idx1-ubyte",
        "test_images": out / "t10k-images-idx3-ubyte",
        "test_labels": out / "t10k-labels-idx1-ubyte",
    }
    train_imgs, train_labels = synthetic_glyphs(train_per_class, seed=seed, split=0)
    test_imgs, test_labels = synthetic_glyphs(test_per_class, seed=seed, split=1)
    write_idx(train_imgs, train_labels, paths["images"], paths["labels"])
    write_idx(test_imgs, test_labels, paths["test_images"], paths["test_labels"])
    return paths
