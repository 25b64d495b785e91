"""Squared-loss gradient boosting over exact-greedy CART trees."""

from __future__ import annotations

import numpy as np

from .. import _trees
from .base import RegressorSpec, TrainedModel, normalize_importance


def fit_gradient_boosting(X, y, feature_ids, spec: RegressorSpec | None = None) -> TrainedModel:
    spec = spec or RegressorSpec("gradient_boosting")
    hp = spec.hyperparams
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lr = float(hp["learning_rate"])
    f0 = float(y.mean())
    F = np.full(len(y), f0)
    order = _trees.presort(X)
    trees = []
    for _ in range(int(hp["n_trees"])):
        tree, leaf = _trees.grow_tree(X, y - F, max_depth=int(hp["max_depth"]),
                                      min_samples_leaf=int(hp["min_samples_leaf"]), order=order)
        F += lr * tree["value"][leaf]
        trees.append(tree)
    stacked = _trees.stack_trees(trees)
    params = {"init": f0, **stacked}
    return TrainedModel(spec, tuple(feature_ids), params, gb_importance(params, X.shape[1], X))


def gb_importance(params: dict, n_features: int, X: np.ndarray) -> np.ndarray:
    """Total squared-error reduction per feature over all trees, normalised."""
    f = params["feature"]
    split = f >= 0
    raw = np.bincount(f[split], weights=params["gain"][split], minlength=n_features)
    return normalize_importance(raw, X)


def gb_predict(model: TrainedModel, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
    p = model.parameters
    return _trees.ensemble_predict(p, X, n_trees=n_trees, scale=model.spec.hyperparams["learning_rate"],
                                   base=p["init"])


def truncate(model: TrainedModel, n_trees: int, X: np.ndarray) -> TrainedModel:
    """The model a fit with ``n_trees`` stages would have produced.

    Boosting is deterministic and stage-wise, so the first k trees of a longer
    fit are exactly the k-tree fit. ``X`` is the training matrix (importance
    needs it to zero constant columns).
    """
    p = model.parameters
    n_trees = min(int(n_trees), len(p["offsets"]) - 1)
    end = p["offsets"][n_trees]
    params = {"init": p["init"], "offsets": p["offsets"][: n_trees + 1].copy()}
    for key in ("feature", "threshold", "left", "right", "value", "gain"):
        params[key] = p[key][:end].copy()
    spec = model.spec.with_params(n_trees=n_trees)
    return TrainedModel(spec, model.feature_ids, params, gb_importance(params, len(model.feature_ids), X))
