"""Dataset container, synthetic blob generator, text/IDX loaders, batching.

Every loader either returns a :class:`Dataset` that passes full validation
or raises; there are no partially constructed datasets.  All randomness is
driven by explicit integer seeds so that any dataset or batch order can be
regenerated exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

__all__ = [
    "Dataset",
    "make_blobs",
    "save_delimited",
    "load_delimited",
    "load_idx",
    "epoch_permutation",
    "iter_batches",
    "IDX_IMAGE_MAGIC",
    "IDX_LABEL_MAGIC",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

_SPLIT_STREAMS = {"train": 1, "eval": 2}


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer labels and a declared class count."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"

    def __post_init__(self) -> None:
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError(f"features must be a non-empty (N, D) matrix, got shape {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise ValueError(
                f"labels shape {labels.shape} does not match {feats.shape[0]} samples"
            )
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain NaN or Inf")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )

    def __len__(self) -> int:
        return self.features.shape[0]


def make_blobs(
    classes: int,
    per_class: int,
    dim: int,
    spread: float,
    seed: int,
    split: str = "train",
) -> Dataset:
    """Isotropic Gaussian clusters around class means on the unit sphere.

    Class means depend on ``seed`` only, so the train and eval splits of the
    same seed share means and differ only in their noise draws.  ``spread``
    is the per-coordinate noise standard deviation; 0 collapses every sample
    onto its class mean.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    if split not in _SPLIT_STREAMS:
        raise ValueError(f"split must be one of {sorted(_SPLIT_STREAMS)}, got {split!r}")

    means_rng = np.random.default_rng([seed, 0])
    raw = means_rng.standard_normal((classes, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("degenerate class mean direction")
    means = raw / norms

    noise_rng = np.random.default_rng([seed, _SPLIT_STREAMS[split]])
    n = classes * per_class
    features = np.repeat(means, per_class, axis=0)
    if spread > 0:
        features = features + spread * noise_rng.standard_normal((n, dim))
    labels = np.repeat(np.arange(classes, dtype=np.int64), per_class)
    return Dataset(features=features, labels=labels, num_classes=classes, split=split)


def save_delimited(path, dataset: Dataset, delimiter: str = ",") -> None:
    """Write one sample per line, features then label, floats in round-trip form."""
    with open(path, "w", encoding="ascii") as fh:
        for row, label in zip(dataset.features, dataset.labels):
            fields = [repr(float(v)) for v in row] + [str(int(label))]
            fh.write(delimiter.join(fields) + "\n")


def load_delimited(
    path,
    delimiter: str = ",",
    label_column: int = -1,
    has_header: bool = False,
    num_classes: int | None = None,
    split: str = "train",
) -> Dataset:
    """Parse a delimited text file of numeric features plus an integer label column.

    Malformed input raises ValueError naming the offending 1-based line.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    start = 1 if has_header else 0
    rows: list[list[float]] = []
    labels: list[int] = []
    width: int | None = None
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        fields = line.split(delimiter)
        if width is None:
            width = len(fields)
            if width < 2:
                raise ValueError(f"{path}: line {lineno}: need at least 2 fields, got {width}")
        elif len(fields) != width:
            raise ValueError(
                f"{path}: line {lineno}: expected {width} fields, got {len(fields)}"
            )
        col = label_column if label_column >= 0 else width + label_column
        if not 0 <= col < width:
            raise ValueError(f"{path}: line {lineno}: label column {label_column} out of range")
        try:
            labels.append(int(fields[col].strip()))
        except ValueError:
            raise ValueError(
                f"{path}: line {lineno}: label {fields[col].strip()!r} is not an integer"
            ) from None
        feats = []
        for k, field in enumerate(fields):
            if k == col:
                continue
            try:
                feats.append(float(field))
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: field {k + 1} ({field.strip()!r}) is not numeric"
                ) from None
        rows.append(feats)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    label_arr = np.asarray(labels, dtype=np.int64)
    if label_arr.min() < 0:
        raise ValueError(f"{path}: negative label {label_arr.min()}")
    c = num_classes if num_classes is not None else int(label_arr.max()) + 1
    return Dataset(
        features=np.asarray(rows, dtype=np.float64),
        labels=label_arr,
        num_classes=max(c, 2),
        split=split,
    )


def _read_idx_header(data: bytes, path, expected_magic: int, ndim: int) -> tuple[int, ...]:
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise ValueError(f"{path}: truncated header ({len(data)} bytes)")
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise ValueError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    return struct.unpack(f">{ndim}I", data[4:header_len])


def load_idx(images_path, labels_path, split: str = "train") -> Dataset:
    """Read big-endian IDX image/label files into a flat, unit-scaled Dataset.

    Pixel bytes are divided by 255 so features land in [0, 1]; image rows
    are flattened to D = rows * cols.
    """
    with open(images_path, "rb") as fh:
        img_data = fh.read()
    with open(labels_path, "rb") as fh:
        lbl_data = fh.read()

    n_img, rows, cols = _read_idx_header(img_data, images_path, IDX_IMAGE_MAGIC, 3)
    (n_lbl,) = _read_idx_header(lbl_data, labels_path, IDX_LABEL_MAGIC, 1)
    if n_img != n_lbl:
        raise ValueError(f"image count {n_img} does not match label count {n_lbl}")

    img_payload = img_data[16:]
    if len(img_payload) != n_img * rows * cols:
        raise ValueError(
            f"{images_path}: payload is {len(img_payload)} bytes, "
            f"expected {n_img * rows * cols}"
        )
    lbl_payload = lbl_data[8:]
    if len(lbl_payload) != n_lbl:
        raise ValueError(
            f"{labels_path}: payload is {len(lbl_payload)} bytes, expected {n_lbl}"
        )

    pixels = np.frombuffer(img_payload, dtype=np.uint8).reshape(n_img, rows * cols)
    features = pixels.astype(np.float64) / 255.0
    labels = np.frombuffer(lbl_payload, dtype=np.uint8).astype(np.int64)
    return Dataset(
        features=features,
        labels=labels,
        num_classes=max(int(labels.max()) + 1, 2),
        split=split,
    )


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    """Deterministic shuffle of 0..n-1, a fresh permutation per (seed, epoch)."""
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    return np.random.default_rng([seed, epoch]).permutation(n)


def iter_batches(n: int, batch_size: int, seed: int, epoch: int) -> Iterator[np.ndarray]:
    """Yield index batches covering one shuffled epoch; the last may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = epoch_permutation(n, seed, epoch)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]
