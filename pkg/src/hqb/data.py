"""Dataset ingestion, normalization, label encoding, and deterministic splits.

Two ingestion formats:

* canonical CSV -- optional header, comma-separated numeric features plus one
  label column (position selectable, default last). String labels are mapped
  to integers by first appearance; integer labels are kept as-is.
* IDX -- the big-endian MNIST image/label pair format, optionally gzipped.

``prepare_dataset`` runs the full pipeline for a named benchmark and writes a
self-describing directory (``data.npz`` + ``manifest.json``) that the
training commands consume.
"""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import rng as rng_streams
from .util import environment_stamp, file_sha256, read_json, write_json

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

SUBSETS = ("train", "val", "test")


class CsvParseError(ValueError):
    """Malformed CSV record; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class IdxFormatError(ValueError):
    """IDX file violates the magic-number format."""


class SplitPolicy(Enum):
    EIGHT_ONE_ONE = "8:1:1"
    MNIST_FIVE_SEVENTHS = "5/7:1/7:1/7"


@dataclass
class RawTable:
    """Parsed rows before normalization: features plus integer class labels."""

    features: np.ndarray  # (rows, n_features) float64
    labels: np.ndarray  # (rows,) int64 in [0, n_classes)
    n_classes: int
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("one label per row required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class Dataset:
    """Normalized features, one-hot labels, and a frozen index partition."""

    name: str
    features: np.ndarray  # (rows, n_features) in [0, 1]
    labels_one_hot: np.ndarray  # (rows, n_classes)
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.labels_one_hot.shape[1]

    def subset(self, name: str) -> np.ndarray:
        if name not in SUBSETS:
            raise ValueError(f"unknown subset {name!r}")
        return getattr(self, f"{name}_idx")

    def labels(self) -> np.ndarray:
        return self.labels_one_hot.argmax(axis=1)


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------

def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_csv(path, label_column: int = -1) -> RawTable:
    """Parse a canonical CSV. A non-numeric first row is treated as a header."""
    rows: list[list[str]] = []
    with open(path, "r", newline="", encoding="utf-8") as handle:
        for line_number, record in enumerate(csv.reader(handle), start=1):
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            rows.append((line_number, [cell.strip() for cell in record]))
    if not rows:
        raise ValueError(f"{path}: empty file")

    def feature_cells(cells: list[str]) -> list[str]:
        idx = label_column if label_column >= 0 else len(cells) + label_column
        return cells[:idx] + cells[idx + 1 :]

    def is_numeric(cells: list[str]) -> bool:
        try:
            for cell in cells:
                float(cell)
        except ValueError:
            return False
        return True

    # a first row whose feature cells do not parse as numbers is a header
    if not is_numeric(feature_cells(rows[0][1])):
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: no data rows after header")
    width = len(rows[0][1])
    if width < 2:
        raise CsvParseError(rows[0][0], "need at least one feature column and a label column")
    label_idx = label_column if label_column >= 0 else width + label_column
    if not 0 <= label_idx < width:
        raise ValueError(f"label column {label_column} out of range for {width} columns")
    features = np.empty((len(rows), width - 1), dtype=np.float64)
    raw_labels: list[str] = []
    for r, (line_number, cells) in enumerate(rows):
        if len(cells) != width:
            raise CsvParseError(line_number, f"expected {width} columns, got {len(cells)}")
        raw_labels.append(cells[label_idx])
        feature_cells = cells[:label_idx] + cells[label_idx + 1 :]
        try:
            features[r] = [float(cell) for cell in feature_cells]
        except ValueError as exc:
            raise CsvParseError(line_number, str(exc)) from None
    labels, n_classes, class_names = _encode_labels(raw_labels)
    return RawTable(features, labels, n_classes, class_names)


def _encode_labels(raw: list[str]) -> tuple[np.ndarray, int, list[str]]:
    try:
        values = [int(float(cell)) for cell in raw]
        if all(float(cell) == int(float(cell)) for cell in raw) and min(values) >= 0:
            labels = np.asarray(values, dtype=np.int64)
            n_classes = int(labels.max()) + 1
            return labels, n_classes, [str(c) for c in range(n_classes)]
    except ValueError:
        pass
    mapping: dict[str, int] = {}
    for cell in raw:
        if cell not in mapping:
            mapping[cell] = len(mapping)
    labels = np.asarray([mapping[cell] for cell in raw], dtype=np.int64)
    return labels, len(mapping), list(mapping)


def _read_idx_header(handle, expected_magic: int, n_dims: int, path) -> tuple[int, ...]:
    header = handle.read(4 * (1 + n_dims))
    if len(header) != 4 * (1 + n_dims):
        raise IdxFormatError(f"{path}: truncated header")
    values = struct.unpack(f">{1 + n_dims}i", header)
    if values[0] != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic number 0x{values[0]:08x}, expected 0x{expected_magic:08x}"
        )
    return values[1:]


def load_idx(images_path, labels_path) -> RawTable:
    """Load an IDX image/label pair; images are flattened row-major to
    ``rows*cols`` features with raw byte values in [0, 255]."""
    with _open_maybe_gzip(images_path) as handle:
        count, n_rows, n_cols = _read_idx_header(handle, IDX_IMAGE_MAGIC, 3, images_path)
        payload = handle.read()
        expected = count * n_rows * n_cols
        if len(payload) < expected:
            raise IdxFormatError(
                f"{images_path}: truncated payload ({len(payload)} of {expected} bytes)"
            )
        images = np.frombuffer(payload, dtype=np.uint8, count=expected)
        features = images.reshape(count, n_rows * n_cols).astype(np.float64)
    with _open_maybe_gzip(labels_path) as handle:
        (label_count,) = _read_idx_header(handle, IDX_LABEL_MAGIC, 1, labels_path)
        payload = handle.read()
        if len(payload) < label_count:
            raise IdxFormatError(
                f"{labels_path}: truncated payload ({len(payload)} of {label_count} bytes)"
            )
        labels = np.frombuffer(payload, dtype=np.uint8, count=label_count).astype(np.int64)
    if label_count != count:
        raise IdxFormatError(
            f"image count {count} does not match label count {label_count}"
        )
    n_classes = int(labels.max()) + 1 if labels.size else 1
    return RawTable(features, labels, n_classes, [str(c) for c in range(n_classes)])


# ---------------------------------------------------------------------------
# normalization, encoding, splitting
# ---------------------------------------------------------------------------

def normalize_minmax(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-feature rescale to [0, 1] over the whole table; constant features
    map to 0. Returns ``(scaled, mins, maxs)``."""
    features = np.asarray(features, dtype=np.float64)
    mins = features.min(axis=0)
    maxs = features.max(axis=0)
    span = maxs - mins
    scaled = np.zeros_like(features)
    varying = span > 0
    scaled[:, varying] = (features[:, varying] - mins[varying]) / span[varying]
    return scaled, mins, maxs


def scale_pixels(features: np.ndarray) -> np.ndarray:
    """The fixed-range shortcut for pixel data: divide [0, 255] by 255."""
    features = np.asarray(features, dtype=np.float64)
    if features.min() < 0 or features.max() > 255:
        raise ValueError("pixel features must lie in [0, 255]")
    return features / 255.0


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError("label out of range")
    out = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def split_dataset(
    n_rows: int,
    policy: SplitPolicy,
    seed: int,
    n_designated_test: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic train/val/test index partition.

    EIGHT_ONE_ONE shuffles everything; val and test each get
    ``floor(0.1 * n_rows)`` rows and the remainder goes to train.
    MNIST_FIVE_SEVENTHS keeps the trailing ``n_designated_test`` rows as the
    untouched test set and shuffles the leading portion into a validation set
    of the same size plus the training set.
    """
    if n_rows < 1:
        raise ValueError("cannot split an empty table")
    gen = rng_streams.stream(seed, rng_streams.SPLIT)
    if policy is SplitPolicy.EIGHT_ONE_ONE:
        n_eval = int(0.1 * n_rows)
        perm = gen.permutation(n_rows)
        n_train = n_rows - 2 * n_eval
        return perm[:n_train], perm[n_train : n_train + n_eval], perm[n_train + n_eval :]
    if n_designated_test is None or not 0 < n_designated_test < n_rows:
        raise ValueError("MNIST policy needs the designated test-row count")
    n_lead = n_rows - n_designated_test
    if n_designated_test > n_lead:
        raise ValueError("designated test portion larger than the train portion")
    test = np.arange(n_lead, n_rows)
    perm = gen.permutation(n_lead)
    val = perm[:n_designated_test]
    train = perm[n_designated_test:]
    return train, val, test


def batches(
    dataset: Dataset, subset: str, batch_size: int, seed: int, epoch: int
) -> list[np.ndarray]:
    """Shuffled index batches, reshuffled deterministically per (seed, epoch);
    the final short batch is kept."""
    indices = dataset.subset(subset)
    if indices.size == 0:
        raise ValueError(f"subset {subset!r} is empty")
    if batch_size < 1:
        raise ValueError("batch size must be positive")
    gen = rng_streams.stream(seed, rng_streams.BATCHES, epoch)
    perm = indices[gen.permutation(indices.size)]
    return [perm[i : i + batch_size] for i in range(0, perm.size, batch_size)]


# ---------------------------------------------------------------------------
# prepared dataset directories
# ---------------------------------------------------------------------------

DATASET_NAMES = ("banknote", "breastcancer", "mnist", "audiomnist-csv")


def _subsample(gen: np.random.Generator, n_rows: int, keep: int) -> np.ndarray:
    if keep >= n_rows:
        return np.arange(n_rows)
    return np.sort(gen.choice(n_rows, size=keep, replace=False))


def prepare_dataset(
    name: str,
    inputs: list,
    seed: int,
    out_dir,
    subsample_train: int | None = None,
    subsample_test: int | None = None,
    label_column: int = -1,
) -> Dataset:
    """Ingest, normalize, encode, split, and persist one benchmark dataset."""
    if name not in DATASET_NAMES:
        raise ValueError(f"unknown dataset {name!r}; choose from {DATASET_NAMES}")
    sources = [str(p) for p in inputs]
    normalization: dict = {}
    n_designated_test = None

    if name in ("banknote", "breastcancer"):
        if len(inputs) != 1:
            raise ValueError(f"{name} expects one CSV input")
        table = load_csv(inputs[0], label_column=label_column)
        features, mins, maxs = normalize_minmax(table.features)
        normalization = {"mode": "minmax", "min": mins.tolist(), "max": maxs.tolist()}
        policy = SplitPolicy.EIGHT_ONE_ONE
    elif name == "audiomnist-csv":
        if len(inputs) != 1:
            raise ValueError("audiomnist-csv expects one CSV input")
        table = load_csv(inputs[0], label_column=label_column)
        features = scale_pixels(table.features)
        normalization = {"mode": "divide255"}
        policy = SplitPolicy.EIGHT_ONE_ONE
        if subsample_train is not None:
            gen = rng_streams.stream(seed, rng_streams.SUBSAMPLE)
            keep = _subsample(gen, table.n_rows, subsample_train)
            features = features[keep]
            table = RawTable(table.features[keep], table.labels[keep], table.n_classes, table.class_names)
    else:  # mnist
        if len(inputs) != 4:
            raise ValueError(
                "mnist expects four inputs: train-images train-labels test-images test-labels"
            )
        train_part = load_idx(inputs[0], inputs[1])
        test_part = load_idx(inputs[2], inputs[3])
        if train_part.n_features != test_part.n_features:
            raise ValueError("train and test images have different shapes")
        gen = rng_streams.stream(seed, rng_streams.SUBSAMPLE)
        train_keep = _subsample(gen, train_part.n_rows, subsample_train or train_part.n_rows)
        test_keep = _subsample(gen, test_part.n_rows, subsample_test or test_part.n_rows)
        n_classes = max(train_part.n_classes, test_part.n_classes)
        table = RawTable(
            np.concatenate([train_part.features[train_keep], test_part.features[test_keep]]),
            np.concatenate([train_part.labels[train_keep], test_part.labels[test_keep]]),
            n_classes,
            [str(c) for c in range(n_classes)],
        )
        features = scale_pixels(table.features)
        normalization = {"mode": "divide255"}
        policy = SplitPolicy.MNIST_FIVE_SEVENTHS
        n_designated_test = int(test_keep.size)

    train_idx, val_idx, test_idx = split_dataset(
        table.n_rows, policy, seed, n_designated_test=n_designated_test
    )
    provenance = {
        "name": name,
        "policy": policy.value,
        "seed": seed,
        "sources": [{"path": src, "sha256": file_sha256(src)} for src in sources],
        "normalization": normalization,
        "class_names": table.class_names,
        "subsample": {"train": subsample_train, "test": subsample_test},
        "environment": environment_stamp(),
    }
    dataset = Dataset(
        name=name,
        features=features,
        labels_one_hot=one_hot(table.labels, table.n_classes),
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        provenance=provenance,
    )
    save_prepared(dataset, out_dir)
    return dataset


def save_prepared(dataset: Dataset, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savez(
        out_dir / "data.npz",
        features=dataset.features,
        labels_one_hot=dataset.labels_one_hot,
        train_idx=dataset.train_idx,
        val_idx=dataset.val_idx,
        test_idx=dataset.test_idx,
    )
    manifest = dict(dataset.provenance)
    manifest["rows"] = int(dataset.features.shape[0])
    manifest["n_features"] = dataset.n_features
    manifest["n_classes"] = dataset.n_classes
    manifest["split_sizes"] = {
        "train": int(dataset.train_idx.size),
        "val": int(dataset.val_idx.size),
        "test": int(dataset.test_idx.size),
    }
    manifest["checksums"] = {"data.npz": file_sha256(out_dir / "data.npz")}
    write_json(out_dir / "manifest.json", manifest)


def load_prepared(directory) -> Dataset:
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    with np.load(directory / "data.npz") as data:
        return Dataset(
            name=manifest["name"],
            features=data["features"],
            labels_one_hot=data["labels_one_hot"],
            train_idx=data["train_idx"],
            val_idx=data["val_idx"],
            test_idx=data["test_idx"],
            provenance=manifest,
        )
