"""MissForest-style iterative random-forest imputation, per tool."""

from __future__ import annotations

import math

import numpy as np

from .. import _trees
from ..dataset import FdcDataset, SplitAssignment
from .base import ImputedDataset, ImputerSpec, finish, train_flags, training_medians


def fit_forest(X, y, n_trees, max_features, seed, max_depth=None):
    """Bagged exact-greedy regression trees; returns a stacked ensemble."""
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    trees = []
    for t in range(n_trees):
        weights = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
        trees.append(_trees.grow_random_tree(X, y, max_features=max_features, max_depth=max_depth,
                                             weights=weights, seed=int(rng.integers(0, 2**31 - 1))))
    return _trees.stack_trees(trees)


def _impute_block(x, obs, fit_rows, med, n_trees, max_iter, tol, max_depth, seed):
    L, m = x.shape
    cur = np.where(obs, x, med[None, :])
    miss = ~obs
    if not miss.any() or m < 2:
        return cur, 0, True
    cols = [j for j in np.argsort(miss.sum(axis=0), kind="stable") if miss[:, j].any()]
    mf = max(1, math.ceil(math.sqrt(m - 1)))
    rng = np.random.default_rng(seed)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prev = cur[miss].copy()
        for j in cols:
            train = fit_rows & obs[:, j]
            if not train.any():
                continue  # no regression target: the column keeps its initial median
            others = np.delete(np.arange(m), j)
            Xf = np.ascontiguousarray(cur[np.ix_(train, others)])
            forest = fit_forest(Xf, x[train, j], n_trees, mf, int(rng.integers(0, 2**31 - 1)), max_depth)
            rows = miss[:, j]
            pred = _trees.ensemble_predict(forest, cur[np.ix_(rows, others)], scale=1.0 / n_trees)
            cur[rows, j] = pred
        change = float(np.mean((cur[miss] - prev) ** 2))
        if change < tol:
            converged = True
            break
    return cur, it, converged


def impute_random_forest(ds: FdcDataset, spec: ImputerSpec | None = None,
                         split_: SplitAssignment | None = None) -> ImputedDataset:
    spec = spec or ImputerSpec("random_forest")
    p = spec.params
    med = training_medians(ds, split_)
    is_train = train_flags(ds, split_)
    values = ds.values.copy()
    not_converged, iterations = [], {}
    ss = np.random.SeedSequence(spec.seed)
    tools = ds.tools()
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(tools))]
    for tool, seed in zip(tools, seeds):
        rows = ds.tool_rows(tool)
        block, it, ok = _impute_block(ds.values[rows], ds.mask[rows], is_train[rows], med,
                                      int(p["n_trees"]), int(p["max_iterations"]), float(p["tolerance"]),
                                      p.get("max_depth"), seed)
        values[rows] = block
        iterations[str(tool)] = it
        if not ok:
            not_converged.append(str(tool))
    return finish(ds, values, spec, {"iterations": iterations, "not_converged": not_converged})
