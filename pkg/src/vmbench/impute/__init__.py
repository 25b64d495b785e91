"""The five imputers, MDAR, and a single ``impute`` entry point."""

from __future__ import annotations

from ..dataset import FdcDataset, SplitAssignment
from .arima import NonStationarySeries, impute_arima
from .base import (KINDS, EmptySubset, ImputedDataset, ImputeError, ImputerSpec, mdar,
                   write_imputed)
from .forest import impute_random_forest
from .knn import impute_knn
from .simple import impute_nearest, impute_random

__all__ = [
    "KINDS", "EmptySubset", "ImputeError", "ImputedDataset", "ImputerSpec", "NonStationarySeries",
    "impute", "impute_arima", "impute_knn", "impute_nearest", "impute_random",
    "impute_random_forest", "mdar", "write_imputed",
]


def impute(ds: FdcDataset, spec: ImputerSpec, split_: SplitAssignment | None = None) -> ImputedDataset:
    """Fit ``spec`` on the training rows of ``split_`` (all rows if None) and fill every gap."""
    if spec.kind == "random":
        return impute_random(ds, spec=spec)
    if spec.kind == "nearest":
        return impute_nearest(ds, split_, spec=spec)
    if spec.kind == "knn":
        return impute_knn(ds, split_=split_, spec=spec)
    if spec.kind == "arima":
        return impute_arima(ds, split_=split_, spec=spec)
    return impute_random_forest(ds, spec=spec, split_=split_)
