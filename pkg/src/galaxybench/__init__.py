"""Pool-based active learning engine and benchmark harness.

Implements the GALAXY graph-bisection query strategy for extremely
class-imbalanced multi-class classification, random and confidence
sampling baselines, a budgeted labeling oracle with cost accounting, and
a reproducible experiment harness with label-efficiency and class
diversity metrics.
"""

from .core import (
    BudgetTracker,
    Dataset,
    Example,
    PoolState,
    PredictionMatrix,
    mark_labeled,
    per_class_label_counts,
)
from .galaxy import GalaxyStrategy, build_graph, bisect_step, find_bisectable_segments, margin_scores
from .harness import (
    AggregateResult,
    ExperimentConfig,
    RunResult,
    accuracy,
    aggregate,
    compare_strategies,
    per_class_min_queries,
    run_experiment,
    run_many,
    smooth,
)
from .learner import LearnerConfig, Model, loss_and_gradient, predict_matrix, predict_proba, train
from .oracle import LabelingOracle, OracleConfig, QueryReceipt
from .simdata import (
    FLASH_POPULATIONS,
    GenConfig,
    generate_synthetic,
    load_dataset,
    partition,
    save_dataset,
)
from .strategies import (
    ConfidenceStrategy,
    QueryStrategy,
    RandomStrategy,
    StrategyContext,
    make_strategy,
    select_batch,
)

__version__ = "0.1.0"
