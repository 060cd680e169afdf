"""Command-line surface: dataset generation, runs, comparisons, reports.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
Experiment configs are JSON with a versioned schema; unknown keys are
rejected so a typo cannot silently invalidate a comparison.  See the
README for the documented schema.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import ConfigError, GalaxyBenchError, GridMismatch
from .harness import (
    ExperimentConfig,
    compare_strategies,
    coverage_threshold,
    labels_when_min_reaches,
    run_many,
    run_summary,
    write_json,
    write_strategy_artifacts,
)
from .learner import LearnerConfig
from .oracle import OracleConfig
from .report import write_report
from .simdata import GenConfig, generate_synthetic, resolve_populations, save_dataset
from .strategies import STRATEGY_NAMES

CONFIG_SCHEMA_VERSION = 1


class _UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(message, self)


# -- config parsing -----------------------------------------------------------


def _take(payload: dict, known: set[str], where: str) -> None:
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(sorted(unknown))}")


def _parse_learner(payload: dict) -> LearnerConfig:
    known = {"kind", "hidden_units", "epochs", "learning_rate", "minibatch_size", "l2", "init_seed"}
    _take(payload, known, "learner")
    try:
        return LearnerConfig(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid learner config: {exc}")


def _parse_oracle(payload: dict) -> OracleConfig:
    _take(payload, {"flops_per_query", "unit_cost_per_query"}, "oracle")
    try:
        return OracleConfig(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid oracle config: {exc}")


def _parse_data(payload) -> tuple[GenConfig | str, int | None]:
    if payload == "flash-default":
        return GenConfig(), None
    if not isinstance(payload, dict):
        raise ConfigError('data must be "flash-default", a generator object, or a path object')
    if "path" in payload:
        _take(payload, {"path", "num_classes"}, "data")
        return str(payload["path"]), payload.get("num_classes")
    known = {"profile", "populations", "dim", "separation", "spread", "seed"}
    _take(payload, known, "data")
    if "profile" in payload and "populations" in payload:
        raise ConfigError("data: give either profile or populations, not both")
    if "profile" in payload:
        populations = resolve_populations(str(payload["profile"]))
    elif "populations" in payload:
        populations = tuple(int(c) for c in payload["populations"])
    else:
        raise ConfigError("data: needs profile, populations, or path")
    try:
        return (
            GenConfig(
                populations=populations,
                dim=int(payload.get("dim", GenConfig.dim)),
                separation=float(payload.get("separation", GenConfig.separation)),
                spread=float(payload.get("spread", GenConfig.spread)),
                seed=int(payload.get("seed", GenConfig.seed)),
            ),
            None,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid data config: {exc}")


def _check_strategy_name(name: str) -> str:
    if name not in STRATEGY_NAMES:
        raise ConfigError(
            f"unknown strategy {name!r}; valid names: {', '.join(STRATEGY_NAMES)}"
        )
    return name


def _parse_strategy_list(raw, payload: dict) -> list[str]:
    """Compare entries: names, or objects whose overrides must be no-ops.

    A budget override that differs from the shared value is a grid
    mismatch; any other differing override is rejected because compared
    strategies must be identical in everything but name.
    """
    if not isinstance(raw, list) or len(raw) < 2:
        raise ConfigError("compare needs a strategies list with at least two entries")
    names = []
    for entry in raw:
        if isinstance(entry, str):
            names.append(_check_strategy_name(entry))
            continue
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError("strategy entries must be names or objects with a name")
        names.append(_check_strategy_name(str(entry["name"])))
        for key, value in entry.items():
            if key == "name":
                continue
            if key not in payload:
                raise ConfigError(f"strategy entry override {key!r} is not a config key")
            if value != payload[key]:
                if key == "budget":
                    raise GridMismatch(
                        f"GridMismatch: strategy {entry['name']!r} overrides budget "
                        f"{value!r} != shared {payload[key]!r}"
                    )
                raise ConfigError(
                    f"strategy configs may differ only in name; {entry['name']!r} "
                    f"overrides {key!r}"
                )
    if len(set(names)) != len(names):
        raise ConfigError("duplicate strategy names in compare list")
    return names


def load_config(path: str, mode: str) -> tuple[ExperimentConfig, list[str], int]:
    """Parse and validate an experiment config file.

    ``mode`` is "run" (single strategy key) or "compare" (strategies
    list).  Returns the config (strategy field set to the first name),
    the full strategy-name list, and the worker count.
    """
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise ConfigError("config root must be an object")

    known = {
        "schema_version", "strategy", "strategies", "batch_size", "budget", "runs",
        "base_seed", "per_class_test", "smoothing_window", "accuracy_targets",
        "workers", "learner", "data", "oracle",
    }
    _take(payload, known, "config")
    version = payload.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {CONFIG_SCHEMA_VERSION}, got {version!r}"
        )
    if "budget" not in payload:
        raise ConfigError("config requires a budget (maximum labels)")

    if mode == "run":
        if "strategy" not in payload:
            raise ConfigError('run config requires a "strategy" name')
        if "strategies" in payload:
            raise ConfigError('run config takes "strategy", not "strategies"')
        strategies = [_check_strategy_name(str(payload["strategy"]))]
    else:
        if "strategies" not in payload:
            raise ConfigError('compare config requires a "strategies" list')
        if "strategy" in payload:
            raise ConfigError('compare config takes "strategies", not "strategy"')
        strategies = _parse_strategy_list(payload["strategies"], payload)

    data, data_num_classes = _parse_data(payload.get("data", "flash-default"))
    learner = _parse_learner(dict(payload.get("learner", {})))
    oracle = _parse_oracle(dict(payload.get("oracle", {})))
    try:
        config = ExperimentConfig(
            max_labels=int(payload["budget"]),
            strategy=strategies[0],
            batch_size=int(payload.get("batch_size", 204)),
            learner=learner,
            data=data,
            data_num_classes=data_num_classes,
            per_class_test=int(payload.get("per_class_test", 10)),
            runs=int(payload.get("runs", 5)),
            base_seed=int(payload.get("base_seed", 0)),
            smoothing_window=int(payload.get("smoothing_window", 10)),
            accuracy_targets=tuple(float(t) for t in payload.get("accuracy_targets", ())),
            oracle=oracle,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}")
    workers = int(payload.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return config, strategies, workers


# -- subcommands ---------------------------------------------------------------


def _cmd_generate(args) -> int:
    populations = resolve_populations(args.populations)
    config = GenConfig(
        populations=populations,
        dim=args.dim,
        separation=args.separation,
        spread=args.spread,
        seed=args.seed,
    )
    dataset = generate_synthetic(config)
    save_dataset(dataset, args.out)
    counts = dataset.class_counts()
    print(f"wrote {len(dataset)} examples, {dataset.num_classes} classes, dim {dataset.dim} -> {args.out}")
    print(f"class populations: min {counts.min()} max {counts.max()}")
    for c, n in enumerate(counts):
        print(f"  class {c}: {n}")
    return 0


def _cmd_run(args) -> int:
    config, strategies, workers = load_config(args.config, mode="run")
    if args.workers is not None:
        workers = args.workers
    dataset = config.load_data()
    results, agg = run_many(config, dataset, workers=workers)
    write_strategy_artifacts(args.out, config, results, agg, dataset)
    print(f"strategy {strategies[0]}: {config.runs} run(s) -> {args.out}")
    print(f"final smoothed accuracy: {agg.final_smoothed_accuracy():.4f}")
    return 0


def _comparison_tables(config: ExperimentConfig, outcome, dataset) -> dict:
    """Labels-to-reach and reduction-vs-random tables for the summary JSON."""
    import time

    aggregates = {name: agg for name, (_, agg) in outcome.items()}
    targets = {repr(t): t for t in config.accuracy_targets}
    if "random" in aggregates:
        mid = 0.95 * aggregates["random"].final_smoothed_accuracy()
        targets["mid_range_95pct_of_random_final"] = mid
    labels_to_reach = {
        name: {key: agg.labels_to_reach(t) for key, t in targets.items()}
        for name, agg in aggregates.items()
    }
    reductions = {}
    if "random" in aggregates:
        for name in aggregates:
            reductions[name] = {}
            for key in targets:
                base = labels_to_reach["random"][key]
                mine = labels_to_reach[name][key]
                if base is None or mine is None or base == 0:
                    reductions[name][key] = None
                else:
                    reductions[name][key] = 100.0 * (1.0 - mine / base)
    threshold = coverage_threshold(dataset, config.per_class_test)
    coverage = {}
    for name, (results, _) in outcome.items():
        per_run = [labels_when_min_reaches(r, threshold) for r in results]
        censored = [config.max_labels if v is None else v for v in per_run]
        coverage[name] = {
            "per_run": per_run,
            "mean_censored_at_budget": float(np.mean(censored)),
        }
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "strategies": list(outcome),
        "targets": {k: float(v) for k, v in targets.items()},
        "labels_to_reach": labels_to_reach,
        "reduction_vs_random_percent": reductions,
        "coverage_threshold": threshold,
        "labels_to_full_minority_coverage": coverage,
    }


def _cmd_compare(args) -> int:
    config, strategies, workers = load_config(args.config, mode="compare")
    if args.workers is not None:
        workers = args.workers
    dataset = config.load_data()
    outcome = compare_strategies(config, strategies, dataset, workers=workers)
    for name, (results, agg) in outcome.items():
        write_strategy_artifacts(
            os.path.join(args.out, name), replace(config, strategy=name), results, agg, dataset
        )

    import csv as _csv

    joint_path = os.path.join(args.out, "comparison.csv")
    os.makedirs(args.out, exist_ok=True)
    import tempfile

    fd, tmp = tempfile.mkstemp(dir=args.out, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["strategy", "labels_acquired", "mean_accuracy", "stderr_accuracy", "mean_min_queries"]
            )
            for name in strategies:
                agg = outcome[name][1]
                for i in range(len(agg.labels)):
                    writer.writerow(
                        [
                            name,
                            int(agg.labels[i]),
                            repr(float(agg.mean_accuracy[i])),
                            repr(float(agg.stderr_accuracy[i])),
                            repr(float(agg.mean_min_queries[i])),
                        ]
                    )
        os.replace(tmp, joint_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

    write_json(_comparison_tables(config, outcome, dataset), os.path.join(args.out, "comparison.json"))
    print(f"compared {', '.join(strategies)} -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    csv_path = args.csv or os.path.join(args.indir, "report.csv")
    svg_path = args.svg or os.path.join(args.indir, "report.svg")
    written = write_report(args.indir, csv_path, svg_path, args.window, png=not args.no_png)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="galaxybench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset CSV")
    gen.add_argument("--populations", default="flash",
                     help='profile name ("flash") or comma-separated counts')
    gen.add_argument("--dim", type=int, default=GenConfig.dim)
    gen.add_argument("--separation", type=float, default=GenConfig.separation)
    gen.add_argument("--spread", type=float, default=GenConfig.spread)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output dataset CSV path")
    gen.set_defaults(fn=_cmd_generate)

    run = sub.add_parser("run", help="execute one strategy's experiment runs")
    run.add_argument("--config", required=True, help="experiment config JSON")
    run.add_argument("--out", required=True, help="output artifact directory")
    run.add_argument("--workers", type=int, default=None, help="parallel runs")
    run.set_defaults(fn=_cmd_run)

    cmp_ = sub.add_parser("compare", help="run several strategies with shared seeds")
    cmp_.add_argument("--config", required=True, help="experiment config JSON with strategies list")
    cmp_.add_argument("--out", required=True, help="output artifact directory")
    cmp_.add_argument("--workers", type=int, default=None, help="parallel runs")
    cmp_.set_defaults(fn=_cmd_compare)

    rep = sub.add_parser("report", help="emit smoothed curve CSV, SVG and PNG charts")
    rep.add_argument("--in", dest="indir", required=True, help="run or compare artifact directory")
    rep.add_argument("--csv", default=None, help="curve CSV output path")
    rep.add_argument("--svg", default=None, help="SVG chart output path")
    rep.add_argument("--window", type=int, default=10, help="smoothing window")
    rep.add_argument("--no-png", action="store_true", help="skip matplotlib PNG figures")
    rep.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(exc.parser.format_usage(), file=sys.stderr, end="")
        return 1
    try:
        return args.fn(args)
    except (ConfigError, GridMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GalaxyBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
