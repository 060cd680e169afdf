"""Domain data model shared by all modules.

Datasets carry hidden true labels; strategies only ever see a
:class:`PoolState` plus a :class:`PredictionMatrix`, so label information
flows exclusively through the oracle.  Sample ids are stable integers
assigned at dataset load and used for every cross-module reference; sort
positions inside strategy internals are never exposed.

Dataset, Example and PredictionMatrix are immutable after construction.
PoolState and BudgetTracker are mutable records owned by the single-threaded
experiment loop; they are safe to share read-only once a run completes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import AlreadyLabeled, UnknownId

DEFAULT_FLOPS_PER_QUERY = 3.35e7


@dataclass(frozen=True)
class Example:
    """One sample: stable id, feature vector, and its hidden true label.

    ``true_label`` is meant for the oracle and the test-evaluation path
    only; query strategies never receive Example objects.
    """

    id: int
    features: np.ndarray
    true_label: int


class Dataset:
    """Ordered collection of examples with a fixed class count and dimension.

    Stored columnar (ids, features, labels) for efficiency; ``example(i)``
    materializes a view row as an :class:`Example`.
    """

    def __init__(self, ids, features, labels, num_classes: int):
        ids = np.asarray(ids, dtype=np.int64)
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if ids.ndim != 1 or features.ndim != 2 or labels.ndim != 1:
            raise ValueError("ids and labels must be 1-D, features 2-D")
        if not (len(ids) == len(features) == len(labels)):
            raise ValueError("ids, features and labels must have equal length")
        if len(ids) == 0:
            raise ValueError("dataset must contain at least one example")
        if num_classes < 1:
            raise ValueError("num_classes must be positive")
        if ids.min() < 0:
            raise ValueError("ids must be non-negative")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("ids must be unique within a dataset")
        if labels.min() < 0 or labels.max() >= num_classes:
            raise ValueError("labels must lie in [0, num_classes)")
        self.ids = ids
        self.features = features
        self.labels = labels
        self.num_classes = int(num_classes)
        self.ids.setflags(write=False)
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def example(self, index: int) -> Example:
        return Example(
            id=int(self.ids[index]),
            features=self.features[index],
            true_label=int(self.labels[index]),
        )

    def __iter__(self) -> Iterator[Example]:
        for i in range(len(self)):
            yield self.example(i)

    def label_of(self, sample_id: int) -> int:
        """True label lookup by id; reserved for oracle and evaluation code."""
        rows = np.nonzero(self.ids == sample_id)[0]
        if len(rows) == 0:
            raise UnknownId(f"id {sample_id} not in dataset")
        return int(self.labels[rows[0]])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


class PredictionMatrix:
    """Per-sample class-probability vectors over a pool, indexed by id.

    Rows are stored sorted by ascending id.  Construction validates the
    probability-vector invariants on every row: entries in [0, 1] and row
    sums within 1e-9 of 1.
    """

    ROW_SUM_TOL = 1e-9

    def __init__(self, ids, probs):
        ids = np.asarray(ids, dtype=np.int64)
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 2 or len(ids) != len(probs):
            raise ValueError("need one probability row per id")
        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        self.probs = np.ascontiguousarray(probs[order])
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in prediction matrix")
        if self.probs.size:
            if self.probs.min() < 0.0 or self.probs.max() > 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
            err = np.abs(self.probs.sum(axis=1) - 1.0).max()
            if err > self.ROW_SUM_TOL:
                raise ValueError(f"probability rows must sum to 1 (max error {err:.3e})")
        self._row_of = np.full(int(self.ids.max()) + 1 if len(self.ids) else 1, -1, dtype=np.int64)
        self._row_of[self.ids] = np.arange(len(self.ids))
        self.ids.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def row_index(self, sample_id: int) -> int:
        if sample_id < 0 or sample_id >= len(self._row_of) or self._row_of[sample_id] < 0:
            raise UnknownId(f"id {sample_id} not covered by prediction matrix")
        return int(self._row_of[sample_id])

    def row(self, sample_id: int) -> np.ndarray:
        return self.probs[self.row_index(sample_id)]

    def covers(self, sample_ids) -> bool:
        return all(
            0 <= i < len(self._row_of) and self._row_of[i] >= 0 for i in sample_ids
        )

    def max_probs(self) -> np.ndarray:
        """Highest class probability per row, aligned with ``self.ids``."""
        return self.probs.max(axis=1)


class QueryRecord(NamedTuple):
    id: int
    iteration: int


class PoolState:
    """Partition of the training ids into labeled and unlabeled sets.

    Mutated only by :func:`mark_labeled` from the experiment loop; the
    partition invariant (labeled and unlabeled disjoint, union = all ids)
    holds after every operation.
    """

    def __init__(self, ids):
        all_ids = frozenset(int(i) for i in ids)
        if len(all_ids) == 0:
            raise ValueError("pool must contain at least one id")
        self.all_ids = all_ids
        self.labeled: dict[int, int] = {}
        self.unlabeled: set[int] = set(all_ids)
        self.query_log: list[QueryRecord] = []

    def __len__(self) -> int:
        return len(self.all_ids)

    @property
    def num_labeled(self) -> int:
        return len(self.labeled)

    def is_labeled(self, sample_id: int) -> bool:
        return sample_id in self.labeled


def mark_labeled(pool: PoolState, sample_id: int, label: int, iteration: int) -> PoolState:
    """Move ``sample_id`` from unlabeled to labeled and log the query.

    Returns the updated pool.  Raises :class:`AlreadyLabeled` on a repeat
    id and :class:`UnknownId` for ids outside the pool.
    """
    sample_id = int(sample_id)
    if sample_id in pool.labeled:
        raise AlreadyLabeled(f"id {sample_id} is already labeled")
    if sample_id not in pool.all_ids:
        raise UnknownId(f"id {sample_id} not in pool")
    pool.unlabeled.discard(sample_id)
    pool.labeled[sample_id] = int(label)
    pool.query_log.append(QueryRecord(sample_id, int(iteration)))
    return pool


def per_class_label_counts(pool: PoolState, num_classes: int) -> np.ndarray:
    """Counts of revealed labels per class; sums to the labeled-set size."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for label in pool.labeled.values():
        if label < 0 or label >= num_classes:
            raise ValueError(f"revealed label {label} outside [0, {num_classes})")
        counts[label] += 1
    return counts


@dataclass
class BudgetTracker:
    """Label budget and exact cost accounting.

    FLOPs and monetary cost are derived as ``used_labels * rate`` on
    demand, so the accounting invariant holds exactly with no float drift
    over any number of queries.
    """

    max_labels: int
    flops_per_query: float = DEFAULT_FLOPS_PER_QUERY
    unit_cost_per_query: float = 0.0
    used_labels: int = field(default=0)

    def __post_init__(self):
        if self.max_labels < 1:
            raise ValueError("max_labels must be positive")
        if self.flops_per_query < 0 or self.unit_cost_per_query < 0:
            raise ValueError("per-query costs must be non-negative")

    @property
    def remaining(self) -> int:
        return self.max_labels - self.used_labels

    @property
    def exhausted(self) -> bool:
        return self.used_labels >= self.max_labels

    @property
    def flops_used(self) -> float:
        return self.used_labels * self.flops_per_query

    @property
    def cost_used(self) -> float:
        return self.used_labels * self.unit_cost_per_query

    def charge(self) -> None:
        if self.exhausted:
            from .errors import BudgetExceeded

            raise BudgetExceeded(f"label budget of {self.max_labels} is spent")
        self.used_labels += 1
