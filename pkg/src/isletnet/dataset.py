"""Labeled datasets: CSV/IDX ingestion, resolution-pyramid features,
synthetic density-variation generators and cross-validation splits."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

# Pyramid side lengths, coarse to fine: 1x1 + 2x2 + 4x4 + 8x8 = 85 values.
PYRAMID_SIDES = (1, 2, 4, 8)
PYRAMID_DIM = sum(s * s for s in PYRAMID_SIDES)

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


class DataError(ValueError):
    """An input file or array does not match the expected format."""


@dataclass(frozen=True)
class LabeledPoint:
    """One feature vector with its class label and stable dataset index."""

    features: np.ndarray
    label: int
    id: int


@dataclass
class Dataset:
    """A fixed-dimension collection of labeled feature vectors.

    Parameters
    ----------
    features : ndarray of shape (n, dim)
        One row per point; all values finite.
    labels : ndarray of shape (n,)
        Dense non-negative integer class ids.
    label_names : tuple of str
        Optional display names, indexed by label id.
    """

    features: np.ndarray
    labels: np.ndarray
    label_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D array")
        if self.features.shape[0] == 0:
            raise DataError("dataset is empty")
        if self.features.shape[1] == 0:
            raise DataError("feature dimension must be positive")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must align with feature rows")
        if self.labels.min(initial=0) < 0:
            raise DataError("labels must be non-negative integers")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> np.ndarray:
        """Sorted array of the labels present."""
        return np.unique(self.labels)

    def __len__(self) -> int:
        return self.n

    def point(self, i: int) -> LabeledPoint:
        return LabeledPoint(self.features[i], int(self.labels[i]), i)

    def class_name(self, label: int) -> str:
        if 0 <= label < len(self.label_names):
            return self.label_names[label]
        return str(label)

    def subset(self, ids) -> "Dataset":
        """New dataset holding the given rows, renumbered 0..m-1."""
        ids = np.asarray(ids, dtype=np.int64)
        return Dataset(self.features[ids], self.labels[ids], self.label_names)


def _area_resample(grid: np.ndarray, out_side: int) -> np.ndarray:
    """Resample a square grid to out_side x out_side by area-weighted means.

    Each output cell is the mean of the input region it covers, with
    fractional pixel overlap when the side lengths do not divide evenly.
    Constant grids map to the same constant.
    """
    g = grid.shape[0]
    scale = g / out_side
    weights = np.zeros((out_side, g))
    for r in range(out_side):
        lo, hi = r * scale, (r + 1) * scale
        cells = np.arange(g)
        overlap = np.minimum(hi, cells + 1) - np.maximum(lo, cells)
        weights[r] = np.clip(overlap, 0.0, None) / scale
    return weights @ grid @ weights.T


def _mean_pool_2x2(grid: np.ndarray) -> np.ndarray:
    s = grid.shape[0] // 2
    return grid.reshape(s, 2, s, 2).mean(axis=(1, 3))


def pyramid_features(image) -> np.ndarray:
    """85-dimensional multiresolution features of a square grey-level grid.

    The input is area-resampled to 8x8, then successively 2x2 mean-pooled
    to 4x4, 2x2 and 1x1; the four levels are concatenated coarse to fine.

    Parameters
    ----------
    image : array-like of shape (G, G)
        Grey levels in [0, 1], G >= 8.

    Returns
    -------
    ndarray of shape (85,)
        Values in [0, 1].
    """
    grid = np.asarray(image, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise DataError(f"image must be square, got shape {grid.shape}")
    if grid.shape[0] < 8:
        raise DataError(f"image side must be >= 8, got {grid.shape[0]}")
    if not np.all(np.isfinite(grid)):
        raise DataError("image contains non-finite values")
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise DataError("grey levels must lie in [0, 1]")

    levels = {8: _area_resample(grid, 8)}
    for side in (4, 2, 1):
        levels[side] = _mean_pool_2x2(levels[side * 2])
    return np.concatenate([levels[s].ravel() for s in PYRAMID_SIDES])


def load_csv_dataset(path, skip_header: bool = False) -> Dataset:
    """Read a CSV of feature rows whose final column is the class label.

    Labels are arbitrary strings, mapped to dense integer ids in
    first-seen order.
    """
    rows: list[list[float]] = []
    raw_labels: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if skip_header and lines:
        lines = lines[1:]
    for lineno, line in enumerate(lines, start=1 + int(skip_header)):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise DataError(f"{path}: line {lineno}: need features plus a label")
        try:
            rows.append([float(p) for p in parts[:-1]])
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
        raw_labels.append(parts[-1])
    if not rows:
        raise DataError(f"{path}: no data rows")
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise DataError(f"{path}: inconsistent row dimensions {sorted(dims)}")

    name_to_id: dict[str, int] = {}
    labels = []
    for name in raw_labels:
        if name not in name_to_id:
            name_to_id[name] = len(name_to_id)
        labels.append(name_to_id[name])
    return Dataset(np.array(rows), np.array(labels), tuple(name_to_id))


def save_csv_dataset(dataset: Dataset, path) -> None:
    """Write a dataset in the CSV format `load_csv_dataset` reads."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(dataset.n):
            feats = ",".join(repr(float(v)) for v in dataset.features[i])
            fh.write(f"{feats},{dataset.class_name(int(dataset.labels[i]))}\n")


def _read_idx(path, expect_magic: int):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise DataError(f"{path}: truncated IDX header")
    magic, count = struct.unpack(">ii", data[:8])
    if magic != expect_magic:
        raise DataError(f"{path}: bad magic {magic}, expected {expect_magic}")
    return data, count


def load_idx_dataset(images_path, labels_path) -> Dataset:
    """Read the big-endian magic-number image/label pair used by common
    digit datasets, turning each image into pyramid features."""
    img_data, n_images = _read_idx(images_path, IDX_IMAGE_MAGIC)
    if len(img_data) < 16:
        raise DataError(f"{images_path}: truncated image header")
    rows, cols = struct.unpack(">ii", img_data[8:16])
    if rows != cols:
        raise DataError(f"{images_path}: images are {rows}x{cols}, not square")
    expected = 16 + n_images * rows * cols
    if len(img_data) != expected:
        raise DataError(f"{images_path}: expected {expected} bytes, got {len(img_data)}")

    lab_data, n_labels = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if n_labels != n_images:
        raise DataError(
            f"{labels_path}: {n_labels} labels for {n_images} images"
        )
    if len(lab_data) != 8 + n_labels:
        raise DataError(f"{labels_path}: truncated label data")
    if n_images == 0:
        raise DataError(f"{images_path}: empty image file")

    pixels = np.frombuffer(img_data, dtype=np.uint8, offset=16)
    images = pixels.reshape(n_images, rows, cols).astype(np.float64) / 255.0
    features = np.stack([pyramid_features(img) for img in images])
    labels = np.frombuffer(lab_data, dtype=np.uint8, offset=8).astype(np.int64)
    names = tuple(str(v) for v in range(int(labels.max()) + 1))
    return Dataset(features, labels, names)


def load_dataset(path, fmt: str = "csv", labels_path=None,
                 skip_header: bool = False) -> Dataset:
    """Dispatch to the CSV or IDX image-pair loader."""
    if fmt == "csv":
        return load_csv_dataset(path, skip_header=skip_header)
    if fmt == "idx-image-pair":
        if labels_path is None:
            raise DataError("idx-image-pair format needs a labels file")
        return load_idx_dataset(path, labels_path)
    raise DataError(f"unknown dataset format {fmt!r}")


def _triangle(origin, side, sigma, count, dim):
    """Three Gaussian clusters at the corners of an equilateral triangle
    embedded in the first two coordinates of a dim-dimensional space."""
    ox, oy = origin
    corners = ((ox, oy), (ox + side, oy), (ox + side / 2, oy + side * np.sqrt(3) / 2))
    spec = []
    for cx, cy in corners:
        center = (cx, cy) + (0.0,) * (dim - 2)
        spec.append((center, sigma, count))
    return spec


# The density-variation scenario: three spread-out Gaussian clusters plus
# three tight ones (spread ratio 12.5) packed into their own region. The
# geometry is tuned so the multi-level cut separates all six at alpha = 1
# while any single horizontal cut cannot.
_FIG2_SIDE = 8.0
FIG2_SPEC = tuple(
    _triangle((0.0, 0.0), _FIG2_SIDE, 1.0, 20, 7)
    + _triangle((_FIG2_SIDE * 1.5, _FIG2_SIDE * 0.975), _FIG2_SIDE * 0.08,
                0.08, 15, 7)
)


def synth_density_variation(spec=None, seed: int = 0) -> Dataset:
    """Generate labeled Gaussian clusters, one label per spec entry.

    Parameters
    ----------
    spec : sequence of (center, spread, count), optional
        Defaults to the six-cluster density-variation scenario with three
        sparse and three dense clusters.
    seed : int
        Generation is a pure function of (spec, seed).
    """
    if spec is None:
        spec = FIG2_SPEC
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for idx, (center, spread, count) in enumerate(spec):
        if count <= 0:
            raise DataError(f"cluster {idx}: count must be positive")
        if spread <= 0:
            raise DataError(f"cluster {idx}: spread must be positive")
        center = np.asarray(center, dtype=np.float64)
        blocks.append(rng.normal(center, spread, size=(count, center.size)))
        labels.extend([idx] * count)
    names = tuple(f"c{i}" for i in range(len(spec)))
    return Dataset(np.vstack(blocks), np.array(labels), names)


def kfold_split(dataset: Dataset, folds: int, seed: int = 0):
    """Seed-deterministic k-fold splits.

    Returns
    -------
    list of (train, test) Dataset pairs; the test sets are disjoint and
    cover the dataset, sizes differing by at most one.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > dataset.n:
        raise ValueError(f"cannot split {dataset.n} points into {folds} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n)
    splits = []
    for chunk in np.array_split(order, folds):
        test_ids = np.sort(chunk)
        mask = np.ones(dataset.n, dtype=bool)
        mask[test_ids] = False
        train_ids = np.flatnonzero(mask)
        splits.append((dataset.subset(train_ids), dataset.subset(test_ids)))
    return splits
