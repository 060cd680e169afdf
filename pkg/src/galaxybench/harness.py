"""Pool-based active-learning experiment loop, metrics and aggregation.

One run executes the standard protocol: partition off a class-balanced
test set, draw a random seed batch, then loop retrain-from-scratch /
predict-the-pool / select-next-batch until the label budget is met or the
pool is exhausted.  Metrics are recorded after retraining on each
completed batch, so curves are indexed by labels acquired.

Runs are pure functions of (config, run seed): per-run seeds derive from
``base_seed + run_index`` through independent named streams (partition,
initial batch, learner init, strategy), which keeps strategies comparable
point-to-point — same partitions and same seed batch per run index.  The
first batch of every run is random regardless of the configured strategy.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset, PoolState, per_class_label_counts
from .errors import GridMismatch
from .galaxy import GalaxyStrategy
from .learner import LearnerConfig, Model, predict_matrix, train
from .oracle import LabelingOracle, OracleConfig
from .simdata import GenConfig, generate_synthetic, load_dataset, partition
from .strategies import RandomStrategy, StrategyContext, make_strategy, select_batch

SCHEMA_VERSION = 1

# named seed streams derived per run; strategy-independent by construction
_STREAM_PARTITION = 1
_STREAM_INITIAL_BATCH = 2
_STREAM_LEARNER = 3
_STREAM_STRATEGY = 4


def derive_seed(run_seed: int, stream: int) -> int:
    """Stable independent sub-seed for one named stream of a run."""
    return int(np.random.SeedSequence([run_seed, stream]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    max_labels: int
    strategy: str = "random"
    batch_size: int = 204
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    data: GenConfig | str = field(default_factory=GenConfig)
    data_num_classes: int | None = None
    per_class_test: int = 10
    runs: int = 5
    base_seed: int = 0
    smoothing_window: int = 10
    accuracy_targets: tuple[float, ...] = ()
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_labels < 1:
            raise ValueError("max_labels must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")
        if self.per_class_test < 1:
            raise ValueError("per_class_test must be >= 1")
        object.__setattr__(self, "accuracy_targets", tuple(self.accuracy_targets))

    def load_data(self) -> Dataset:
        if isinstance(self.data, GenConfig):
            return generate_synthetic(self.data)
        return load_dataset(self.data, num_classes=self.data_num_classes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    labels_acquired: int
    test_accuracy: float
    per_class_min_queries: int
    cumulative_flops: float


@dataclass
class RunResult:
    strategy: str
    seed: int
    records: list[IterationRecord]
    final_model: Model
    oracle: LabelingOracle
    diagnostics: list[dict[str, int]] = field(default_factory=list)

    @property
    def labels_curve(self) -> np.ndarray:
        return np.array([r.labels_acquired for r in self.records], dtype=np.int64)

    @property
    def accuracy_curve(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.records])

    @property
    def min_queries_curve(self) -> np.ndarray:
        return np.array([r.per_class_min_queries for r in self.records], dtype=np.int64)


def accuracy(model: Model, test: Dataset) -> float:
    """Fraction of test examples whose argmax prediction matches the truth.

    Argmax ties resolve to the lowest class index.
    """
    matrix = predict_matrix(model, test)
    order = np.argsort(test.ids, kind="stable")
    truth = test.labels[order]
    predicted = matrix.probs.argmax(axis=1)
    return float(np.mean(predicted == truth))


def per_class_min_queries(pool: PoolState, num_classes: int) -> int:
    """Minimum over classes of the number of labeled samples (class diversity)."""
    return int(per_class_label_counts(pool, num_classes).min())


def smooth(curve, window: int) -> list[float]:
    """Moving average, window truncated symmetrically at the boundaries.

    At index i the window covers ``[i - (window-1)//2, i + window//2]``
    clipped to the curve, so output length equals input length and a
    window of 1 is the identity.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    values = [float(v) for v in curve]
    n = len(values)
    left = (window - 1) // 2
    right = window // 2
    out = []
    for i in range(n):
        lo = max(0, i - left)
        hi = min(n, i + right + 1)
        out.append(sum(values[lo:hi]) / (hi - lo))
    return out


def run_experiment(
    config: ExperimentConfig, run_seed: int, dataset: Dataset | None = None
) -> RunResult:
    """Execute one active-learning run; deterministic given (config, run_seed)."""
    if dataset is None:
        dataset = config.load_data()
    train_set, test_set = partition(
        dataset, config.per_class_test, derive_seed(run_seed, _STREAM_PARTITION)
    )
    test_ids = frozenset(int(i) for i in test_set.ids)
    num_classes = dataset.num_classes

    oracle = LabelingOracle(train_set, max_labels=config.max_labels, config=config.oracle)
    pool = PoolState(train_set.ids)
    assert pool.all_ids.isdisjoint(test_ids)

    learner_seed = derive_seed(run_seed, _STREAM_LEARNER)
    strategy_seed = derive_seed(run_seed, _STREAM_STRATEGY)
    strategy = make_strategy(config.strategy, strategy_seed)
    # step one is always a random draw, identical across strategies for a
    # given run seed so compared curves are paired samples
    seed_strategy = RandomStrategy(derive_seed(run_seed, _STREAM_INITIAL_BATCH))

    row_of = np.full(int(train_set.ids.max()) + 1, -1, dtype=np.int64)
    row_of[train_set.ids] = np.arange(len(train_set))

    records: list[IterationRecord] = []
    diagnostics: list[dict[str, int]] = []
    iteration = 1
    oracle.iteration = 1
    context = StrategyContext(pool=pool, predictions=None, rng_seed=strategy_seed, iteration=1)
    select_batch(seed_strategy, context, oracle, config.batch_size)

    model: Model | None = None
    while True:
        labeled_ids = np.array([rec.id for rec in pool.query_log], dtype=np.int64)
        rows = row_of[labeled_ids]
        model = train(
            config.learner,
            train_set.features[rows],
            train_set.labels[rows],
            num_classes,
            seed=learner_seed,
        )
        records.append(
            IterationRecord(
                iteration=iteration,
                labels_acquired=pool.num_labeled,
                test_accuracy=accuracy(model, test_set),
                per_class_min_queries=per_class_min_queries(pool, num_classes),
                cumulative_flops=oracle.budget.flops_used,
            )
        )
        if oracle.budget.exhausted or not pool.unlabeled:
            break
        assert pool.all_ids.isdisjoint(test_ids)

        predictions = predict_matrix(model, train_set)
        iteration += 1
        oracle.iteration = iteration
        context = StrategyContext(
            pool=pool, predictions=predictions, rng_seed=strategy_seed, iteration=iteration
        )
        select_batch(strategy, context, oracle, config.batch_size)
        if isinstance(strategy, GalaxyStrategy):
            diagnostics.append({"iteration": iteration, **strategy.diagnostics})

    return RunResult(
        strategy=config.strategy,
        seed=run_seed,
        records=records,
        final_model=model,
        oracle=oracle,
        diagnostics=diagnostics,
    )


@dataclass
class AggregateResult:
    strategy: str
    labels: np.ndarray
    mean_accuracy: np.ndarray
    stderr_accuracy: np.ndarray
    mean_min_queries: np.ndarray
    smoothing_window: int

    def smoothed_mean_accuracy(self) -> list[float]:
        return smooth(self.mean_accuracy, self.smoothing_window)

    def smoothed_mean_min_queries(self) -> list[float]:
        return smooth(self.mean_min_queries, self.smoothing_window)

    def labels_to_reach(self, target: float) -> int | None:
        """Smallest labels-acquired where the smoothed mean accuracy >= target."""
        for labels, acc in zip(self.labels, self.smoothed_mean_accuracy()):
            if acc >= target:
                return int(labels)
        return None

    def final_smoothed_accuracy(self) -> float:
        return self.smoothed_mean_accuracy()[-1]


def aggregate(results: list[RunResult], config: ExperimentConfig) -> AggregateResult:
    """Pointwise mean and standard error across runs sharing one grid."""
    if not results:
        raise ValueError("need at least one run result")
    grid = results[0].labels_curve
    for r in results[1:]:
        if len(r.labels_curve) != len(grid) or np.any(r.labels_curve != grid):
            raise GridMismatch("runs do not share the same labels-acquired grid")
    acc = np.stack([r.accuracy_curve for r in results])
    minq = np.stack([r.min_queries_curve.astype(np.float64) for r in results])
    mean_acc = acc.mean(axis=0)
    if len(results) > 1:
        stderr = acc.std(axis=0, ddof=1) / np.sqrt(len(results))
    else:
        stderr = np.zeros_like(mean_acc)
    return AggregateResult(
        strategy=results[0].strategy,
        labels=grid,
        mean_accuracy=mean_acc,
        stderr_accuracy=stderr,
        mean_min_queries=minq.mean(axis=0),
        smoothing_window=config.smoothing_window,
    )


def labels_when_min_reaches(result: RunResult, threshold: int) -> int | None:
    """Labels acquired when per-class minimum queries first hits ``threshold``."""
    for rec in result.records:
        if rec.per_class_min_queries >= threshold:
            return rec.labels_acquired
    return None


def coverage_threshold(dataset: Dataset, per_class_test: int) -> int:
    """Highest reachable per-class minimum: the smallest training-class size."""
    return int((dataset.class_counts() - per_class_test).min())


def run_many(
    config: ExperimentConfig, dataset: Dataset | None = None, workers: int = 1
) -> tuple[list[RunResult], AggregateResult]:
    """All runs of one strategy; run seeds are base_seed + run index."""
    if dataset is None:
        dataset = config.load_data()
    seeds = [config.base_seed + i for i in range(config.runs)]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [(config, s, dataset) for s in seeds]))
    else:
        results = [run_experiment(config, s, dataset) for s in seeds]
    return results, aggregate(results, config)


def _run_one(args: tuple[ExperimentConfig, int, Dataset]) -> RunResult:
    config, seed, dataset = args
    return run_experiment(config, seed, dataset)


def compare_strategies(
    config: ExperimentConfig,
    strategies: list[str],
    dataset: Dataset | None = None,
    workers: int = 1,
) -> dict[str, tuple[list[RunResult], AggregateResult]]:
    """Run several strategies on identical data, partitions and seed streams."""
    if dataset is None:
        dataset = config.load_data()
    out: dict[str, tuple[list[RunResult], AggregateResult]] = {}
    if workers > 1:
        jobs = [
            (replace(config, strategy=name), config.base_seed + i, dataset)
            for name in strategies
            for i in range(config.runs)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_run_one, jobs))
        for j, name in enumerate(strategies):
            results = flat[j * config.runs : (j + 1) * config.runs]
            out[name] = (results, aggregate(results, config))
    else:
        for name in strategies:
            out[name] = run_many(replace(config, strategy=name), dataset)
    return out


# -- artifact serialization --------------------------------------------------


def _atomic_write(path: str, write_fn) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_run_csv(result: RunResult, path: str) -> None:
    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "labels_acquired", "test_accuracy", "per_class_min_queries", "cumulative_flops"]
        )
        for rec in result.records:
            writer.writerow(
                [
                    rec.iteration,
                    rec.labels_acquired,
                    repr(rec.test_accuracy),
                    rec.per_class_min_queries,
                    repr(rec.cumulative_flops),
                ]
            )

    _atomic_write(path, _write)


def write_aggregate_csv(agg: AggregateResult, path: str) -> None:
    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(["labels_acquired", "mean_accuracy", "stderr_accuracy", "mean_min_queries"])
        for i in range(len(agg.labels)):
            writer.writerow(
                [
                    int(agg.labels[i]),
                    repr(float(agg.mean_accuracy[i])),
                    repr(float(agg.stderr_accuracy[i])),
                    repr(float(agg.mean_min_queries[i])),
                ]
            )

    _atomic_write(path, _write)


def write_json(payload: dict, path: str) -> None:
    _atomic_write(path, lambda fh: json.dump(payload, fh, indent=2, sort_keys=True))


def run_summary(
    config: ExperimentConfig,
    results: list[RunResult],
    agg: AggregateResult,
    dataset: Dataset,
) -> dict:
    """JSON-ready summary of one strategy's runs.

    ``created_at`` is the only non-deterministic field; comparisons must
    exclude it.
    """
    threshold = coverage_threshold(dataset, config.per_class_test)
    per_run = []
    for r in results:
        per_run.append(
            {
                "seed": r.seed,
                "iterations": len(r.records),
                "labels_acquired": r.records[-1].labels_acquired,
                "final_accuracy": r.records[-1].test_accuracy,
                "labels_to_full_minority_coverage": labels_when_min_reaches(r, threshold),
                "cumulative_flops": r.records[-1].cumulative_flops,
                "queries": r.oracle.queries_used,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "strategy": agg.strategy,
        "runs": per_run,
        "coverage_threshold": threshold,
        "labels_to_reach": {
            repr(t): agg.labels_to_reach(t) for t in config.accuracy_targets
        },
        "final_smoothed_accuracy": agg.final_smoothed_accuracy(),
        "total_queries": sum(r.oracle.queries_used for r in results),
        "total_flops": sum(r.oracle.budget.flops_used for r in results),
        "total_unit_cost": sum(r.oracle.budget.cost_used for r in results),
    }


def write_strategy_artifacts(
    outdir: str,
    config: ExperimentConfig,
    results: list[RunResult],
    agg: AggregateResult,
    dataset: Dataset,
) -> None:
    """Per-run CSVs, query logs, model files, aggregate CSV and summary JSON."""
    from .learner import model_to_dict

    os.makedirs(outdir, exist_ok=True)
    for i, result in enumerate(results):
        write_run_csv(result, os.path.join(outdir, f"run_{i}.csv"))
        result.oracle.export_log(os.path.join(outdir, f"query_log_{i}.csv"))
        write_json(model_to_dict(result.final_model), os.path.join(outdir, f"model_{i}.json"))
        if result.diagnostics:
            write_json(
                {"iterations": result.diagnostics},
                os.path.join(outdir, f"diagnostics_{i}.json"),
            )
    write_aggregate_csv(agg, os.path.join(outdir, "aggregate.csv"))
    write_json(run_summary(config, results, agg, dataset), os.path.join(outdir, "summary.json"))
