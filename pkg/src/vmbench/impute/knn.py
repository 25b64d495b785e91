"""Per-tool k-nearest-neighbour imputation with NaN-aware distances."""

from __future__ import annotations

import numpy as np

from ..dataset import FdcDataset, SplitAssignment
from .base import ImputedDataset, ImputerSpec, finish, train_flags, training_medians


def masked_distances(a: np.ndarray, a_obs: np.ndarray, b: np.ndarray, b_obs: np.ndarray) -> np.ndarray:
    """Euclidean distance over coordinates observed in both rows, scaled by
    sqrt(M / n_shared). Pairs with nothing in common are at infinity."""
    m = a.shape[1]
    A = np.where(a_obs, a, 0.0)
    B = np.where(b_obs, b, 0.0)
    Ao, Bo = a_obs.astype(float), b_obs.astype(float)
    sq = (A * A) @ Bo.T + Ao @ (B * B).T - 2.0 * A @ B.T
    shared = Ao @ Bo.T
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = np.maximum(sq, 0.0) * (m / shared)
    d2[shared == 0] = np.inf
    return np.sqrt(d2)


def _impute_block(x, obs, donors, k, fallback):
    """Impute one tool block. ``donors`` indexes the rows allowed to donate."""
    out = x.copy()
    need = np.flatnonzero((~obs).any(axis=1))
    if need.size == 0:
        return out, 0
    dx, dobs = x[donors], obs[donors]
    dist = masked_distances(x[need], obs[need], dx, dobs)
    dvals = np.where(dobs, dx, 0.0)
    n_fallback = 0
    for r, i in enumerate(need):
        order = np.argsort(dist[r], kind="stable")  # ties keep the lower sample index
        o = dobs[order]
        take = o & (np.cumsum(o, axis=0) <= k)
        cnt = take.sum(axis=0)
        sums = (dvals[order] * take).sum(axis=0)
        miss = np.flatnonzero(~obs[i])
        for j in miss:
            if cnt[j] > 0:
                out[i, j] = sums[j] / cnt[j]
            else:
                out[i, j] = fallback[j]
                n_fallback += 1
    return out, n_fallback


def impute_knn(ds: FdcDataset, k: int = 5, split_: SplitAssignment | None = None,
               spec: ImputerSpec | None = None) -> ImputedDataset:
    """Fill each gap with the mean of that feature over the k nearest training
    samples of the same tool that observe it."""
    spec = spec or ImputerSpec("knn", {"k": k})
    k = int(spec.params["k"])
    global_med = training_medians(ds, split_)
    is_train = train_flags(ds, split_)
    values = ds.values.copy()
    n_fallback = 0
    for tool in ds.tools():
        rows = np.flatnonzero(ds.tool_id == tool)
        x, obs = ds.values[rows], ds.mask[rows]
        donors = np.flatnonzero(is_train[rows])
        fallback = global_med.copy()
        for j in range(ds.n_features):
            seen = x[donors, j][obs[donors, j]]
            if seen.size:
                fallback[j] = float(np.median(seen))
        block, nf = _impute_block(x, obs, donors, k, fallback)
        values[rows] = block
        n_fallback += nf
    return finish(ds, values, spec, {"median_fallback_entries": n_fallback}, clip=False)
