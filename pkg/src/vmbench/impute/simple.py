"""Random fill and last-observation-carried-forward."""

from __future__ import annotations

import numpy as np

from ..dataset import FdcDataset, SplitAssignment
from .base import ImputedDataset, ImputerSpec, finish, training_medians


def impute_random(ds: FdcDataset, seed: int = 0, spec: ImputerSpec | None = None) -> ImputedDataset:
    spec = spec or ImputerSpec("random", seed=seed)
    rng = np.random.default_rng(spec.seed)
    values = ds.values.copy()
    miss = ~ds.mask
    values[miss] = rng.uniform(0.0, 1.0, size=int(miss.sum()))
    return finish(ds, values, spec, {}, clip=False)


def fill_series(x: np.ndarray, observed: np.ndarray, fallback) -> np.ndarray:
    """Forward-fill columns of ``x`` along axis 0; leading gaps take the first
    later observation; columns with no observation take ``fallback``."""
    n = x.shape[0]
    idx = np.where(observed, np.arange(n)[:, None], -1)
    np.maximum.accumulate(idx, axis=0, out=idx)
    first = np.where(observed.any(axis=0), observed.argmax(axis=0), -1)
    idx = np.where(idx < 0, first[None, :], idx)
    cols = np.broadcast_to(np.arange(x.shape[1]), x.shape)
    out = x[np.maximum(idx, 0), cols]
    empty = first < 0
    if empty.any():
        out[:, empty] = np.broadcast_to(np.asarray(fallback, dtype=float), (x.shape[1],))[empty]
    return out


def impute_nearest(ds: FdcDataset, split_: SplitAssignment | None = None,
                   spec: ImputerSpec | None = None) -> ImputedDataset:
    """Each gap takes the most recent earlier observation of the same tool and sensor."""
    spec = spec or ImputerSpec("nearest")
    med = training_medians(ds, split_)
    values = ds.values.copy()
    empty_series = 0
    for tool in ds.tools():
        rows = ds.tool_rows(tool)
        obs = ds.mask[rows]
        values[rows] = fill_series(ds.values[rows], obs, med)
        empty_series += int((~obs.any(axis=0)).sum())
    return finish(ds, values, spec, {"median_fallback_series": empty_series}, clip=False)
