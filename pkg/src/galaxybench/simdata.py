"""Synthetic class-imbalanced datasets and dataset file I/O.

The built-in "flash" population profile mirrors an extremely imbalanced
34-class beam-selection corpus: 30711 samples, smallest class 20 members,
largest 6882.  Feature vectors are drawn from isotropic Gaussians around
class means placed uniformly on a sphere, which preserves the property
under study (imbalance) at desk scale.

Dataset CSV layout: header ``id,label,f0,...,f{d-1}``, one example per
line, floats serialized with full round-trip precision.  Externally
extracted feature CSVs with the same header load directly, so real
datasets can be plugged in without in-repo feature code.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset
from .errors import ClassTooSmall, FormatError

FLASH_POPULATIONS = (
    123, 353, 43, 250, 115, 22, 345, 507, 20, 2404, 207, 331, 753, 380,
    252, 3059, 1000, 557, 6882, 927, 39, 1771, 1199, 276, 39, 2254, 411,
    79, 556, 4211, 30, 594, 170, 552,
)

PROFILES = {"flash": FLASH_POPULATIONS}

# Standard synthetic benchmark: imbalanced but neither trivially separable
# nor hopeless, so query strategies differentiate.
DEFAULT_DIM = 32
DEFAULT_SEPARATION = 3.0
DEFAULT_SPREAD = 1.0


def resolve_populations(spec: str) -> tuple[int, ...]:
    """Named profile ("flash") or a comma-separated list of counts."""
    if spec in PROFILES:
        return PROFILES[spec]
    try:
        counts = tuple(int(tok) for tok in spec.split(","))
    except ValueError:
        raise FormatError(f"populations must be a profile name or comma-separated ints, got {spec!r}")
    if not counts or any(c < 1 for c in counts):
        raise FormatError("population counts must be positive")
    return counts


@dataclass(frozen=True)
class GenConfig:
    populations: tuple[int, ...] = FLASH_POPULATIONS
    dim: int = DEFAULT_DIM
    separation: float = DEFAULT_SEPARATION
    spread: float = DEFAULT_SPREAD
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "populations", tuple(int(c) for c in self.populations))
        if len(self.populations) == 0 or any(c < 1 for c in self.populations):
            raise ValueError("populations must be positive")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.separation <= 0 or self.spread <= 0:
            raise ValueError("separation and spread must be positive")


def generate_synthetic(config: GenConfig) -> Dataset:
    """Gaussian-mixture dataset with exactly ``populations[c]`` samples per class.

    Class means are drawn uniformly on a sphere of radius ``separation``;
    per-class feature draws use independently derived seed streams so the
    output is deterministic and order-stable.  Ids are dense 0..n-1 in
    class order.
    """
    k = len(config.populations)
    root = np.random.SeedSequence(config.seed)
    streams = root.spawn(k + 1)
    mean_rng = np.random.default_rng(streams[0])
    directions = mean_rng.normal(size=(k, config.dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    means = config.separation * directions / norms

    total = sum(config.populations)
    features = np.empty((total, config.dim))
    labels = np.empty(total, dtype=np.int64)
    offset = 0
    for c, count in enumerate(config.populations):
        rng = np.random.default_rng(streams[c + 1])
        features[offset : offset + count] = means[c] + config.spread * rng.normal(
            size=(count, config.dim)
        )
        labels[offset : offset + count] = c
        offset += count
    return Dataset(np.arange(total), features, labels, num_classes=k)


def partition(dataset: Dataset, per_class_test: int, seed: int) -> tuple[Dataset, Dataset]:
    """Split off a class-balanced test set of ``per_class_test`` per class.

    The remainder keeps its (imbalanced) class profile and all original
    ids, so train and test id sets stay disjoint by construction.
    Deterministic given ``seed``; re-partitioning with a new seed shuffles
    which samples land in the test set.
    """
    if per_class_test < 1:
        raise ValueError("per_class_test must be positive")
    rng = np.random.default_rng(seed)
    test_rows = np.zeros(len(dataset), dtype=bool)
    for c in range(dataset.num_classes):
        rows = np.nonzero(dataset.labels == c)[0]
        if len(rows) < per_class_test:
            raise ClassTooSmall(c, have=len(rows), need=per_class_test)
        chosen = rng.choice(rows, size=per_class_test, replace=False)
        test_rows[chosen] = True
    train_rows = ~test_rows
    train = Dataset(
        dataset.ids[train_rows],
        dataset.features[train_rows],
        dataset.labels[train_rows],
        dataset.num_classes,
    )
    test = Dataset(
        dataset.ids[test_rows],
        dataset.features[test_rows],
        dataset.labels[test_rows],
        dataset.num_classes,
    )
    return train, test


def save_dataset(dataset: Dataset, path: str) -> None:
    """Write the dataset CSV atomically (temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label"] + [f"f{j}" for j in range(dataset.dim)])
            for i in range(len(dataset)):
                writer.writerow(
                    [int(dataset.ids[i]), int(dataset.labels[i])]
                    + [repr(float(v)) for v in dataset.features[i]]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_dataset(path: str, num_classes: int | None = None) -> Dataset:
    """Load a dataset CSV; round-trips :func:`save_dataset` bit-exactly.

    ``num_classes`` validates labels when given; otherwise the class count
    is inferred as ``max(label) + 1``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file", line=1)
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise FormatError("header must be id,label,f0,...", line=1)
        expected_features = [f"f{j}" for j in range(len(header) - 2)]
        if header[2:] != expected_features:
            raise FormatError("feature columns must be named f0..f{d-1} in order", line=1)
        dim = len(header) - 2

        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise FormatError(f"expected {dim + 2} fields, got {len(row)}", line=lineno)
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
                rows.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise FormatError(str(exc), line=lineno)
            if ids[-1] < 0:
                raise FormatError("ids must be non-negative", line=lineno)
            if labels[-1] < 0:
                raise FormatError("labels must be non-negative", line=lineno)
            if num_classes is not None and labels[-1] >= num_classes:
                raise FormatError(
                    f"label {labels[-1]} out of range for {num_classes} classes", line=lineno
                )

    if not ids:
        raise FormatError("no data rows", line=2)
    k = num_classes if num_classes is not None else max(labels) + 1
    try:
        return Dataset(ids, np.array(rows), labels, num_classes=k)
    except ValueError as exc:
        raise FormatError(str(exc))
