"""Cross-benchmark of imputers and regressor pairings with dev-split tuning."""

from ..tuning import DEFAULT_GRIDS, AllFitsFailed, SearchSpace, TuneResult, tune, tune_fit
from .config import BenchConfig, ConfigError, load_bench_config
from .report import (BenchmarkReport, MissingTraces, ReportError, accuracy_vs_nif, cumulative_accuracy,
                     mdar_vs_nif, to_csv)
from .runner import InjectedFailure, groups_for, prepare, run_benchmark

__all__ = [
    "DEFAULT_GRIDS", "AllFitsFailed", "BenchConfig", "BenchmarkReport", "ConfigError", "InjectedFailure",
    "MissingTraces", "ReportError", "SearchSpace", "TuneResult", "accuracy_vs_nif", "cumulative_accuracy",
    "groups_for", "load_bench_config", "mdar_vs_nif", "prepare", "run_benchmark", "to_csv", "tune", "tune_fit",
]
