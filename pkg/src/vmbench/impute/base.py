from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..dataset import FdcDataset, SplitAssignment, write_csv

KINDS = ("random", "nearest", "knn", "arima", "random_forest")

DEFAULT_PARAMS = {
    "random": {},
    "nearest": {},
    "knn": {"k": 5},
    "arima": {"max_p": 3, "max_d": 1, "max_q": 3},
    "random_forest": {"n_trees": 10, "max_iterations": 3, "tolerance": 1e-4, "max_depth": None},
}


class ImputeError(ValueError):
    pass


class EmptySubset(ImputeError):
    pass


@dataclass(frozen=True)
class ImputerSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ImputeError(f"unknown imputer kind {self.kind!r}; expected one of {KINDS}")
        merged = dict(DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ImputeError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        p = merged
        if self.kind == "knn" and p["k"] < 1:
            raise ImputeError("k must be >= 1")
        if self.kind == "arima" and min(p["max_p"], p["max_d"], p["max_q"]) < 0:
            raise ImputeError("ARIMA orders must be >= 0")
        if self.kind == "random_forest" and (p["n_trees"] < 1 or p["max_iterations"] < 1):
            raise ImputeError("n_trees and max_iterations must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ImputerSpec":
        return cls(d["kind"], dict(d.get("params", {})), int(d.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class ImputedDataset:
    """A complete copy of a dataset; its mask is kept as provenance."""

    dataset: FdcDataset
    imputer: ImputerSpec
    flags: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.dataset.values

    @property
    def provenance_mask(self) -> np.ndarray:
        return self.dataset.mask

    def imputed_counts(self) -> dict[str, int]:
        miss = (~self.provenance_mask).sum(axis=0)
        return {fid: int(c) for fid, c in zip(self.dataset.feature_ids, miss)}

    def provenance(self) -> dict:
        return {"imputer": self.imputer.to_dict(), "seed": self.imputer.seed,
                "fallback_flags": self.flags, "imputed_counts": self.imputed_counts()}


def training_medians(ds: FdcDataset, split_: SplitAssignment | None) -> np.ndarray:
    """Per-feature median of observed training entries; falls back to all rows, then 0.5."""
    rows = np.arange(ds.n_samples) if split_ is None else split_.train
    med = np.full(ds.n_features, 0.5)
    for j in range(ds.n_features):
        obs = ds.values[rows, j][ds.mask[rows, j]]
        if obs.size == 0:
            obs = ds.values[ds.mask[:, j], j]
        if obs.size:
            med[j] = float(np.median(obs))
    return med


def train_flags(ds: FdcDataset, split_: SplitAssignment | None) -> np.ndarray:
    if split_ is None:
        return np.ones(ds.n_samples, dtype=bool)
    return split_.role == 0


def finish(ds: FdcDataset, values: np.ndarray, spec: ImputerSpec, flags: dict,
           clip: bool = True) -> ImputedDataset:
    values = np.array(values, dtype=np.float64)
    if clip:
        np.clip(values, 0.0, 1.0, out=values)
    values[ds.mask] = ds.values[ds.mask]  # observed entries untouched, bit for bit
    if not np.isfinite(values).all():
        raise ImputeError(f"{spec.kind} imputation left non-finite entries")
    return ImputedDataset(ds.with_values(values, ds.mask.copy()), spec, flags)


def mdar(mask: np.ndarray, feature_subset: Iterable[int] | None = None) -> float:
    """Mean data available ratio: observed entries over (features x samples).

    ``feature_subset`` holds column indices; ``None`` means every column.
    """
    mask = np.asarray(mask, dtype=bool)
    cols = np.arange(mask.shape[1]) if feature_subset is None else np.asarray(sorted(set(feature_subset)), dtype=np.int64)
    if cols.size == 0:
        raise EmptySubset("MDAR needs at least one feature")
    sub = mask[:, cols]
    return float(np.count_nonzero(sub)) / (sub.shape[0] * sub.shape[1])


def write_imputed(imp: ImputedDataset, path: str | Path) -> None:
    """CSV in the dataset format plus ``<name>.provenance.json``."""
    path = Path(path)
    write_csv(imp.dataset.with_values(imp.values, np.ones_like(imp.provenance_mask)), path)
    with open(path.with_suffix(".provenance.json"), "w", encoding="utf-8") as fh:
        json.dump(imp.provenance(), fh, indent=1, sort_keys=True)
        fh.write("\n")
