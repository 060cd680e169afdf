"""Labeling oracle: reveals true labels on request and accounts their cost.

The oracle stands in for an expensive labeler (an exhaustive-search
algorithm, a human expert, or a metered proprietary IP); these differ only
in cost parameters, so one implementation covers all of them.  The default
computational price is 3.35e7 FLOPs per label.

The oracle is the only object in a run that can see training-pool truth,
and it only knows the training ids, so test samples can never leak in
through a query.  Accessed from the single-threaded experiment loop; one
oracle per run.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .core import BudgetTracker, DEFAULT_FLOPS_PER_QUERY, Dataset
from .errors import BudgetExceeded, UnknownId


@dataclass(frozen=True)
class OracleConfig:
    flops_per_query: float = DEFAULT_FLOPS_PER_QUERY
    unit_cost_per_query: float = 0.0

    def __post_init__(self):
        if self.flops_per_query < 0 or self.unit_cost_per_query < 0:
            raise ValueError("per-query costs must be non-negative")


@dataclass(frozen=True)
class QueryReceipt:
    id: int
    label: int
    cumulative_queries: int
    cumulative_flops: float
    cumulative_cost: float
    repeat: bool = False


class LabelingOracle:
    """Answers label queries for training-pool ids within a label budget.

    Repeat queries return the cached label free of charge with the
    ``repeat`` flag set; strategies are forbidden from repeats by their own
    contract, but the oracle stays robust if one slips through.
    """

    def __init__(self, train: Dataset, max_labels: int, config: OracleConfig | None = None):
        self.config = config or OracleConfig()
        self._truth = {int(i): int(l) for i, l in zip(train.ids, train.labels)}
        self.budget = BudgetTracker(
            max_labels=max_labels,
            flops_per_query=self.config.flops_per_query,
            unit_cost_per_query=self.config.unit_cost_per_query,
        )
        self._revealed: dict[int, int] = {}
        self.iteration = 0
        self.log: list[tuple[int, int, int, float, float]] = []

    @property
    def queries_used(self) -> int:
        return self.budget.used_labels

    def _receipt(self, sample_id: int, label: int, repeat: bool) -> QueryReceipt:
        return QueryReceipt(
            id=sample_id,
            label=label,
            cumulative_queries=self.budget.used_labels,
            cumulative_flops=self.budget.flops_used,
            cumulative_cost=self.budget.cost_used,
            repeat=repeat,
        )

    def query(self, sample_id: int) -> QueryReceipt:
        """Reveal the true label of ``sample_id``, charging the budget once.

        Raises :class:`UnknownId` for ids outside the training pool and
        :class:`BudgetExceeded` when a first-time query arrives with the
        budget already spent.
        """
        sample_id = int(sample_id)
        if sample_id in self._revealed:
            return self._receipt(sample_id, self._revealed[sample_id], repeat=True)
        if sample_id not in self._truth:
            raise UnknownId(f"id {sample_id} not in the training pool")
        if self.budget.exhausted:
            raise BudgetExceeded(f"label budget of {self.budget.max_labels} is spent")
        label = self._truth[sample_id]
        self.budget.charge()
        self._revealed[sample_id] = label
        self.log.append(
            (self.iteration, sample_id, label, self.budget.flops_used, self.budget.cost_used)
        )
        return self._receipt(sample_id, label, repeat=False)

    def export_log(self, path: str) -> None:
        """Query log CSV: iteration,id,label,cumulative_flops,cumulative_cost."""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["iteration", "id", "label", "cumulative_flops", "cumulative_cost"])
                for iteration, sample_id, label, flops, cost in self.log:
                    writer.writerow([iteration, sample_id, label, repr(flops), repr(cost)])
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
