"""Dataset loading, train/test splits and feature standardization.

Two header-free file formats are supported:

* ``delimited``: one sample per line, label first (token ``?`` marks an
  unlabeled sample), features after it, separated by commas or whitespace.
* ``sparse-index-value``: ``label idx:val idx:val ...`` with 1-based indices,
  densified to the largest index seen in the file.

Labels are remapped to contiguous ids 1..G; the original values are kept on
the dataset (and later in the model file) so predictions can be reported in
the input labeling.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import Dataset
from .errors import ConfigurationError, DimensionMismatchError, ParseError

_VARIANCE_FLOOR = 1e-12


def _parse_label(token: str, line_no: int) -> int | None:
    if token == "?":
        return None
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"line {line_no}: label {token!r} is not numeric") from None
    if value != int(value):
        raise ParseError(f"line {line_no}: label {token!r} is not an integer")
    return int(value)


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped:
                yield line_no, stripped


def _load_delimited(path):
    rows: list[list[float]] = []
    labels: list[int | None] = []
    width = None
    for line_no, line in _data_lines(path):
        fields = line.replace(",", " ").split()
        labels.append(_parse_label(fields[0], line_no))
        feats = []
        for token in fields[1:]:
            try:
                feats.append(float(token))
            except ValueError:
                raise ParseError(
                    f"line {line_no}: feature {token!r} is not numeric"
                ) from None
        if width is None:
            width = len(feats)
        elif len(feats) != width:
            raise ParseError(
                f"line {line_no}: expected {width} features, got {len(feats)}"
            )
        rows.append(feats)
    return rows, labels


def _load_sparse(path):
    entries: list[list[tuple[int, float]]] = []
    labels: list[int | None] = []
    max_index = 0
    for line_no, line in _data_lines(path):
        fields = line.split()
        labels.append(_parse_label(fields[0], line_no))
        row = []
        for token in fields[1:]:
            idx_str, _, val_str = token.partition(":")
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise ParseError(
                    f"line {line_no}: bad index:value pair {token!r}"
                ) from None
            if idx < 1:
                raise ParseError(f"line {line_no}: indices are 1-based, got {idx}")
            row.append((idx, val))
            max_index = max(max_index, idx)
        entries.append(row)
    rows = []
    for row in entries:
        dense = [0.0] * max_index
        for idx, val in row:
            dense[idx - 1] = val
        rows.append(dense)
    return rows, labels


def load(path, format: str = "delimited", n_groups: int | None = None) -> Dataset:
    """Load a dataset file; see the module docstring for the formats.

    ``n_groups`` declares G explicitly (required when it exceeds the number
    of distinct labels in the file, e.g. for unsupervised runs).
    """
    if format == "delimited":
        rows, raw_labels = _load_delimited(path)
    elif format in ("sparse-index-value", "sparse"):
        rows, raw_labels = _load_sparse(path)
    else:
        raise ConfigurationError(f"unknown dataset format {format!r}")
    if not rows:
        raise ConfigurationError(f"{path}: no samples found")

    observed = sorted({v for v in raw_labels if v is not None})
    if n_groups is None:
        if not observed:
            raise ConfigurationError(
                f"{path}: file has no labels; pass the group count explicitly"
            )
        n_groups = len(observed)
    elif n_groups < len(observed):
        raise ConfigurationError(
            f"{n_groups} groups declared but {len(observed)} distinct labels found"
        )
    names = list(observed)
    next_name = (max(observed) + 1) if observed else 1
    while len(names) < n_groups:
        names.append(next_name)
        next_name += 1
    remap = {v: g for g, v in enumerate(names, start=1)}
    labels = np.array([0 if v is None else remap[v] for v in raw_labels])
    return Dataset(
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        n_groups=n_groups,
        label_names=tuple(names),
    )


def load_features(path, format: str = "delimited") -> np.ndarray:
    """Load only the feature matrix, ignoring whatever the label column
    holds (used for query files and extra unlabeled pools)."""
    if format == "delimited":
        rows, _ = _load_delimited(path)
    elif format in ("sparse-index-value", "sparse"):
        rows, _ = _load_sparse(path)
    else:
        raise ConfigurationError(f"unknown dataset format {format!r}")
    if not rows:
        raise ConfigurationError(f"{path}: no samples found")
    return np.asarray(rows, dtype=np.float64)


def save_delimited(dataset: Dataset, path) -> None:
    """Write the delimited format; floats use shortest round-trip repr."""
    with open(path, "w", encoding="utf-8") as fh:
        for n in range(dataset.n_samples):
            label = dataset.labels[n]
            token = "?" if label == 0 else str(dataset.label_names[label - 1])
            feats = ",".join(repr(float(v)) for v in dataset.features[n])
            fh.write(f"{token},{feats}\n" if feats else f"{token}\n")


def _subset(dataset: Dataset, indices: np.ndarray) -> Dataset:
    return Dataset(
        features=dataset.features[indices],
        labels=dataset.labels[indices],
        n_groups=dataset.n_groups,
        label_names=dataset.label_names,
    )


def split(
    dataset: Dataset, train_fraction: float, seed: int, stratified: bool = False
) -> tuple[Dataset, Dataset]:
    """Seeded train/test split; stratified mode preserves per-class
    proportions within one sample.  Indices keep their file order inside
    each side of the split."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError("train fraction must lie strictly in (0, 1)")
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(dataset.n_samples)
        k = int(round(train_fraction * dataset.n_samples))
        k = min(max(k, 1), dataset.n_samples - 1)
        train_idx, test_idx = perm[:k], perm[k:]
    else:
        train_parts, test_parts = [], []
        for value in np.unique(dataset.labels):
            members = np.flatnonzero(dataset.labels == value)
            if members.size < 2:
                raise ConfigurationError(
                    f"stratified split needs >= 2 samples per class, class "
                    f"{value} has {members.size}"
                )
            members = members[rng.permutation(members.size)]
            k = int(round(train_fraction * members.size))
            k = min(max(k, 1), members.size - 1)
            train_parts.append(members[:k])
            test_parts.append(members[k:])
        train_idx = np.concatenate(train_parts)
        test_idx = np.concatenate(test_parts)
    return _subset(dataset, np.sort(train_idx)), _subset(dataset, np.sort(test_idx))


def fit_standardization(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension (mean, scale) with population std; zero-variance
    dimensions pass through untouched (mean 0, scale 1)."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.size == 0:
        raise ConfigurationError("cannot standardize an empty feature matrix")
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    constant = std <= _VARIANCE_FLOOR
    return np.where(constant, 0.0, mean), np.where(constant, 1.0, std)


def standardize(
    train: Dataset, apply_to: Sequence[Dataset] = ()
) -> tuple[Dataset, list[Dataset], np.ndarray, np.ndarray]:
    """Standardize ``train`` by its own statistics and apply the same
    transform to every dataset in ``apply_to``."""
    mean, scale = fit_standardization(train.features)

    def transform(ds: Dataset) -> Dataset:
        if ds.n_features != train.n_features:
            raise DimensionMismatchError("feature dimensions differ across datasets")
        return Dataset(
            features=(ds.features - mean) / scale,
            labels=ds.labels,
            n_groups=ds.n_groups,
            label_names=ds.label_names,
        )

    return transform(train), [transform(ds) for ds in apply_to], mean, scale


def append_unlabeled(dataset: Dataset, features: np.ndarray) -> Dataset:
    """Append rows as unlabeled samples (transductive training input)."""
    extra = np.asarray(features, dtype=np.float64)
    if extra.ndim != 2 or extra.shape[1] != dataset.n_features:
        raise DimensionMismatchError(
            f"extra features must be N' x {dataset.n_features}"
        )
    return Dataset(
        features=np.vstack([dataset.features, extra]),
        labels=np.concatenate([dataset.labels, np.zeros(extra.shape[0], dtype=np.int64)]),
        n_groups=dataset.n_groups,
        label_names=dataset.label_names,
    )
