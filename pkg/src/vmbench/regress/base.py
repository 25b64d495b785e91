from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = ("lls", "pls", "bayesian_ridge", "linear_svr", "gradient_boosting", "neural_network")
LINEAR_KINDS = KINDS[:4]
NONLINEAR_KINDS = KINDS[4:]

DEFAULT_HYPERPARAMS = {
    "lls": {},
    "pls": {"n_components": 2},
    "bayesian_ridge": {"max_iter": 300, "tol": 1e-6, "alpha": None},
    "linear_svr": {"epsilon": 0.01, "C": 1.0, "max_epochs": 200, "learning_rate": 0.5},
    "gradient_boosting": {"n_trees": 100, "max_depth": 3, "learning_rate": 0.1, "min_samples_leaf": 1},
    "neural_network": {"hidden_layer_sizes": (64,), "learning_rate": 1e-2, "max_epochs": 200,
                       "batch_size": 64, "patience": 10},
}

_COUNTS = {"n_components", "max_iter", "max_epochs", "n_trees", "max_depth", "min_samples_leaf",
           "batch_size", "patience"}


class RegressError(ValueError):
    pass


class FeatureMismatch(RegressError):
    pass


class Divergence(ArithmeticError):
    pass


class ConstantTruth(RegressError):
    pass


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RegressError(f"unknown regressor kind {self.kind!r}; expected one of {KINDS}")
        hp = dict(DEFAULT_HYPERPARAMS[self.kind])
        unknown = set(self.hyperparams) - set(hp)
        if unknown:
            raise RegressError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")
        hp.update(self.hyperparams)
        if "hidden_layer_sizes" in hp:
            hp["hidden_layer_sizes"] = tuple(int(h) for h in hp["hidden_layer_sizes"])
        object.__setattr__(self, "hyperparams", hp)
        for k in _COUNTS & set(hp):
            if hp[k] is not None and int(hp[k]) < 1:
                raise RegressError(f"{k} must be >= 1")
        if self.kind == "neural_network":
            sizes = hp["hidden_layer_sizes"]
            if not sizes or any(h < 1 for h in sizes):
                raise RegressError("hidden_layer_sizes needs at least one layer of >= 1 unit")
        if "learning_rate" in hp and not hp["learning_rate"] > 0:
            raise RegressError("learning_rate must be > 0")
        if self.kind == "linear_svr" and (hp["epsilon"] < 0 or not hp["C"] > 0):
            raise RegressError("linear_svr needs epsilon >= 0 and C > 0")

    def with_params(self, **hp) -> "RegressorSpec":
        return RegressorSpec(self.kind, {**self.hyperparams, **hp}, self.seed)

    def to_dict(self) -> dict:
        hp = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.hyperparams.items()}
        return {"kind": self.kind, "hyperparams": hp, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorSpec":
        return cls(d["kind"], dict(d.get("hyperparams", {})), int(d.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: RegressorSpec
    feature_ids: tuple[str, ...]
    parameters: dict
    importance: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def feature_std(X: np.ndarray) -> np.ndarray:
    return X.std(axis=0) if X.shape[0] else np.zeros(X.shape[1])


def normalize_importance(raw: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Clamp to >= 0, zero constant columns, scale to sum 1.

    An all-zero vector spreads uniformly over non-constant columns (or all
    columns if every one is constant).
    """
    imp = np.maximum(np.nan_to_num(np.asarray(raw, dtype=float)), 0.0)
    varying = feature_std(X) > 0
    imp[~varying] = 0.0
    total = imp.sum()
    if total <= 0:
        imp = varying.astype(float) if varying.any() else np.ones(len(imp))
        total = imp.sum()
    imp = imp / total
    return imp


def check_columns(model: TrainedModel, X: np.ndarray, columns: Sequence[str] | None) -> None:
    if X.ndim != 2 or X.shape[1] != len(model.feature_ids):
        raise FeatureMismatch(f"expected {len(model.feature_ids)} columns, got {X.shape[1] if X.ndim == 2 else X.shape}")
    if columns is not None and tuple(columns) != model.feature_ids:
        raise FeatureMismatch("column ids do not match the model's feature_ids in order")


def accuracy(y_true, y_pred) -> float:
    """Squared Pearson correlation between measured and predicted values.

    A constant prediction scores 0.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size < 3:
        raise RegressError("accuracy needs >= 3 paired samples")
    a = y_true - y_true.mean()
    b = y_pred - y_pred.mean()
    saa = float(a @ a)
    sbb = float(b @ b)
    if saa == 0:
        raise ConstantTruth("y_true is constant")
    if sbb == 0 or not np.isfinite(sbb):
        return 0.0
    r = float(a @ b) / math.sqrt(saa * sbb)
    return min(r * r, 1.0)


def r2_score(y_true, y_pred) -> float:
    """Coefficient of determination, 1 - SSE/SST."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    sst = float(((y_true - y_true.mean()) ** 2).sum())
    if sst == 0:
        raise ConstantTruth("y_true is constant")
    return 1.0 - float(((y_true - y_pred) ** 2).sum()) / sst
