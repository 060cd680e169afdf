"""Sequential query-strategy contract plus the random and confidence baselines.

Strategies pick one unlabeled sample at a time; the harness reveals each
label (updating the pool view) before asking for the next.  This single
sequential contract lets feedback-driven strategies and batch-ranking
baselines share the same selection loop.  All tie-breaks are by ascending
id so runs are deterministic across platforms.

A strategy instance belongs to one run; parallel runs use independent
instances with their own seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PoolState, PredictionMatrix, mark_labeled
from .errors import PoolExhausted
from .oracle import LabelingOracle


@dataclass
class StrategyContext:
    """Everything a strategy may see: pool partition state and predictions.

    Notably absent: feature vectors and true labels.  Labels enter only
    through ``pool.labeled`` after the oracle reveals them.
    """

    pool: PoolState
    predictions: PredictionMatrix | None
    rng_seed: int
    iteration: int


class QueryStrategy:
    """Behavioral contract for sequential query selection."""

    name = "base"

    def begin_iteration(self, context: StrategyContext) -> None:
        """Called once per active-learning iteration, after retraining."""

    def next_query(self, context: StrategyContext) -> int:
        raise NotImplementedError

    def observe(self, sample_id: int, label: int) -> None:
        """Label feedback for the most recent query; baselines ignore it."""


class RandomStrategy(QueryStrategy):
    """Uniform sampling without replacement from a seeded generator.

    Draws follow a fixed random permutation of the pool ids, skipping ids
    labeled in the meantime; this is exactly sampling without replacement
    and is independent of any label feedback.
    """

    name = "random"

    def __init__(self, seed: int):
        self.seed = seed
        self._order: list[int] | None = None
        self._cursor = 0

    def next_query(self, context: StrategyContext) -> int:
        if not context.pool.unlabeled:
            raise PoolExhausted("no unlabeled samples remain")
        if self._order is None:
            rng = np.random.default_rng(self.seed)
            self._order = [int(i) for i in rng.permutation(sorted(context.pool.all_ids))]
        while self._cursor < len(self._order):
            candidate = self._order[self._cursor]
            self._cursor += 1
            if candidate in context.pool.unlabeled:
                return candidate
        raise PoolExhausted("no unlabeled samples remain")


class ConfidenceStrategy(QueryStrategy):
    """Least-confidence sampling: lowest maximum class probability first.

    The ranking is computed once per iteration from the prediction matrix
    (confidence = 1 - max probability), so mid-batch label feedback cannot
    change the selection order.  Ties break by ascending id.
    """

    name = "confidence"

    def __init__(self):
        self._ranking: list[int] = []
        self._cursor = 0

    def begin_iteration(self, context: StrategyContext) -> None:
        preds = context.predictions
        if preds is None:
            raise ValueError("confidence sampling requires a prediction matrix")
        # ids are sorted ascending inside PredictionMatrix, so a stable
        # argsort on max-probability alone yields the id tie-break.
        order = np.argsort(preds.max_probs(), kind="stable")
        self._ranking = [int(i) for i in preds.ids[order]]
        self._cursor = 0

    def next_query(self, context: StrategyContext) -> int:
        if not context.pool.unlabeled:
            raise PoolExhausted("no unlabeled samples remain")
        while self._cursor < len(self._ranking):
            candidate = self._ranking[self._cursor]
            self._cursor += 1
            if candidate in context.pool.unlabeled:
                return candidate
        raise PoolExhausted("no unlabeled samples remain")


@dataclass
class SelectionBatch:
    """Outcome of one batch-selection round.

    ``terminal`` is set when the budget or the pool ran out, so the caller
    can stop cleanly; the pairs list is always internally consistent with
    the pool and oracle state.
    """

    pairs: list[tuple[int, int]]
    terminal: bool


def select_batch(
    strategy: QueryStrategy,
    context: StrategyContext,
    oracle: LabelingOracle,
    batch_size: int,
    begin: bool = True,
) -> SelectionBatch:
    """Label up to ``batch_size`` samples chosen sequentially by ``strategy``.

    Exactly ``min(batch_size, |unlabeled|, remaining budget)`` pairs are
    produced.  After each oracle answer the pool, budget and strategy are
    updated before the next query, so feedback-driven strategies see every
    label immediately.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if begin:
        strategy.begin_iteration(context)
    pool = context.pool
    pairs: list[tuple[int, int]] = []
    while len(pairs) < batch_size and pool.unlabeled and not oracle.budget.exhausted:
        sample_id = strategy.next_query(context)
        receipt = oracle.query(sample_id)
        mark_labeled(pool, sample_id, receipt.label, context.iteration)
        strategy.observe(sample_id, receipt.label)
        pairs.append((sample_id, receipt.label))
    terminal = oracle.budget.exhausted or not pool.unlabeled
    return SelectionBatch(pairs=pairs, terminal=terminal)


def make_strategy(name: str, seed: int) -> QueryStrategy:
    """Instantiate a strategy by its configuration name."""
    from .galaxy import GalaxyStrategy

    if name == "random":
        return RandomStrategy(seed)
    if name == "confidence":
        return ConfidenceStrategy()
    if name == "galaxy":
        return GalaxyStrategy()
    raise ValueError(f"unknown strategy {name!r}; valid names: random, confidence, galaxy")


STRATEGY_NAMES = ("random", "confidence", "galaxy")
