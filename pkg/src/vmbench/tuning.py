"""Hyperparameter search spaces and dev-split grid search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import regress
from .regress import RegressError, RegressorSpec, TrainedModel


class AllFitsFailed(RuntimeError):
    pass


def _default_grids() -> dict[str, tuple[dict, ...]]:
    gb = [{"n_trees": t, "max_depth": d, "learning_rate": lr}
          for t, d, lr in itertools.product((100, 300), (3, 5), (0.05, 0.1))]
    nn = [{"hidden_layer_sizes": (w,) * layers, "learning_rate": lr}
          for layers, w, lr in itertools.product((1, 2), (32, 64), (1e-3, 1e-2))]
    svr = [{"C": c, "epsilon": e} for c, e in itertools.product((0.1, 1.0, 10.0), (0.01, 0.05))]
    return {
        "lls": ({},),
        "pls": tuple({"n_components": k} for k in (1, 2, 5, 10, 20)),
        "bayesian_ridge": ({},),
        "linear_svr": tuple(svr),
        "gradient_boosting": tuple(gb),
        "neural_network": tuple(nn),
    }


DEFAULT_GRIDS = _default_grids()


@dataclass(frozen=True)
class SearchSpace:
    """Per regressor kind, an ordered grid of hyperparameter overrides.

    Grid order is significant: it breaks ties between equal dev scores.
    """

    grids: Mapping[str, tuple[dict, ...]]

    def __post_init__(self):
        grids = {k: tuple(dict(c) for c in v) for k, v in self.grids.items()}
        for kind, grid in grids.items():
            if kind not in regress.KINDS:
                raise RegressError(f"search space names unknown regressor {kind!r}")
            if not grid:
                raise RegressError(f"empty grid for {kind}")
            for combo in grid:
                RegressorSpec(kind, combo)  # validates names and ranges
        for kind in regress.KINDS:
            grids.setdefault(kind, DEFAULT_GRIDS[kind])
        object.__setattr__(self, "grids", grids)

    @classmethod
    def default(cls) -> "SearchSpace":
        return cls({})

    def grid(self, kind: str) -> tuple[dict, ...]:
        return self.grids[kind]

    def specs(self, kind: str, seed: int = 0) -> list[RegressorSpec]:
        return [RegressorSpec(kind, combo, seed) for combo in self.grids[kind]]

    def to_dict(self) -> dict:
        return {k: [{p: (list(v) if isinstance(v, tuple) else v) for p, v in c.items()} for c in g]
                for k, g in self.grids.items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SearchSpace":
        return cls({k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True, eq=False)
class TuneResult:
    spec: RegressorSpec
    model: TrainedModel
    dev_accuracy: float
    scores: tuple  # dev accuracy per grid entry, None where the fit failed


def _score(model, X_dev, y_dev) -> float:
    return regress.accuracy(y_dev, regress.predict(model, X_dev))


def _gb_candidates(specs, X, y, ids):
    """GB models for every grid entry, one fit per distinct non-tree-count setting.

    The largest tree count is fit once and truncated for the smaller ones;
    stage-wise boosting makes that identical to fitting each count directly.
    """
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(specs):
        key = tuple(sorted((k, v) for k, v in s.hyperparams.items() if k != "n_trees"))
        groups.setdefault(key, []).append(i)
    out: list = [None] * len(specs)
    for idx in groups.values():
        top = max(idx, key=lambda i: specs[i].hyperparams["n_trees"])
        try:
            full = regress.fit(specs[top], X, y, ids)
        except (RegressError, ArithmeticError) as exc:
            for i in idx:
                out[i] = exc
            continue
        for i in idx:
            out[i] = full if i == top else regress.truncate(full, specs[i].hyperparams["n_trees"], X)
    return out


def tune_fit(kind: str, X_train, y_train, X_dev, y_dev, space: SearchSpace | None = None,
             feature_ids: Sequence[str] | None = None, seed: int = 0) -> TuneResult:
    """Exhaustive grid search scored by dev accuracy; ties go to the earlier entry.

    Returns the winning spec together with its fitted model so callers need
    not refit. A singleton grid is fit exactly once.
    """
    space = space or SearchSpace.default()
    X_train = np.ascontiguousarray(X_train, dtype=np.float64)
    X_dev = np.ascontiguousarray(X_dev, dtype=np.float64)
    ids = tuple(feature_ids) if feature_ids is not None else tuple(f"x{j}" for j in range(X_train.shape[1]))
    specs = space.specs(kind, seed)
    if kind == "gradient_boosting":
        models = _gb_candidates(specs, X_train, y_train, ids)
    else:
        models = []
        for s in specs:
            try:
                models.append(regress.fit(s, X_train, y_train, ids, X_dev=X_dev, y_dev=y_dev))
            except (RegressError, ArithmeticError) as exc:
                models.append(exc)
    scores = []
    best = None
    for i, m in enumerate(models):
        if isinstance(m, Exception):
            scores.append(None)
            continue
        acc = _score(m, X_dev, y_dev)
        scores.append(acc)
        if best is None or acc > scores[best]:
            best = i
    if best is None:
        raise AllFitsFailed(f"every {kind} grid entry failed: {models[0]!r}")
    return TuneResult(specs[best], models[best], scores[best], tuple(scores))


def tune(kind: str, X_train, y_train, X_dev, y_dev, space: SearchSpace | None = None,
         seed: int = 0) -> RegressorSpec:
    return tune_fit(kind, X_train, y_train, X_dev, y_dev, space, seed=seed).spec
