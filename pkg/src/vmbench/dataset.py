"""In-memory FDC data: values, observation mask, per-feature metadata.

Everything here is functional. Operations return new datasets and never
mutate their input, so a dataset can be shared read-only across workers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

TRAIN, DEV, TEST = 0, 1, 2
ROLE_NAMES = ("train", "dev", "test")
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)

RESERVED_COLUMNS = ("tool_id", "timestamp", "target")

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
INDICATOR = "indicator"


class DatasetError(ValueError):
    pass


class TooFewSamples(DatasetError):
    pass


@dataclass(frozen=True)
class FeatureMeta:
    id: str
    kind: str = CONTINUOUS
    source_sensor_id: str = ""
    # categorical only: level labels; the value column stores the level index
    levels: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "source_sensor_id": self.source_sensor_id or self.id}
        if self.levels:
            d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMeta":
        return cls(d["id"], d.get("kind", CONTINUOUS), d.get("source_sensor_id", d["id"]),
                   tuple(d.get("levels", ())))


@dataclass(frozen=True, eq=False)
class FdcDataset:
    """N samples by M features with an explicit mask (True = observed).

    Missing entries hold NaN in ``values``. ``target`` is never missing.
    """

    values: np.ndarray
    mask: np.ndarray
    feature_meta: tuple[FeatureMeta, ...]
    tool_id: np.ndarray
    timestamp: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        n, m = self.values.shape
        if self.mask.shape != (n, m):
            raise DatasetError(f"mask shape {self.mask.shape} != values shape {(n, m)}")
        if len(self.feature_meta) != m:
            raise DatasetError("feature_meta length does not match the number of columns")
        for name in ("tool_id", "timestamp", "target"):
            if len(getattr(self, name)) != n:
                raise DatasetError(f"{name} length != number of samples")
        if np.isnan(self.target).any():
            raise DatasetError("target contains missing values")
        if np.isnan(self.values[self.mask]).any():
            raise DatasetError("observed entries must be finite")
        for a in (self.values, self.mask, self.tool_id, self.timestamp, self.target):
            a.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.feature_meta)

    def columns(self, ids: Sequence[str]) -> np.ndarray:
        index = {f: j for j, f in enumerate(self.feature_ids)}
        return np.array([index[i] for i in ids], dtype=np.int64)

    def tools(self) -> list[str]:
        return sorted(set(self.tool_id.tolist()))

    def tool_rows(self, tool) -> np.ndarray:
        """Row indices of one tool, in timestamp order."""
        rows = np.flatnonzero(self.tool_id == tool)
        return rows[np.argsort(self.timestamp[rows], kind="stable")]

    def with_values(self, values: np.ndarray, mask: np.ndarray | None = None, **changes) -> "FdcDataset":
        return replace(self, values=values, mask=self.mask.copy() if mask is None else mask, **changes)


def make_dataset(values, feature_meta, tool_id, timestamp, target, mask=None) -> FdcDataset:
    values = np.array(values, dtype=np.float64)
    if mask is None:
        mask = ~np.isnan(values)
    else:
        mask = np.array(mask, dtype=bool)
        values[~mask] = np.nan
    meta = tuple(f if isinstance(f, FeatureMeta) else FeatureMeta(str(f)) for f in feature_meta)
    return FdcDataset(values, mask, meta, np.asarray(tool_id, dtype=object),
                      np.asarray(timestamp, dtype=np.float64), np.asarray(target, dtype=np.float64))


def check_timestamps(ds: FdcDataset) -> None:
    for tool in ds.tools():
        ts = ds.timestamp[ds.tool_rows(tool)]
        if np.any(np.diff(ts) <= 0):
            raise DatasetError(f"timestamps not strictly increasing within tool {tool!r}")


# --- splitting -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitAssignment:
    role: np.ndarray  # int8 per sample: TRAIN / DEV / TEST
    seed: int
    strategy: str

    def rows(self, role: int) -> np.ndarray:
        return np.flatnonzero(self.role == role)

    @property
    def train(self) -> np.ndarray:
        return self.rows(TRAIN)

    @property
    def dev(self) -> np.ndarray:
        return self.rows(DEV)

    @property
    def test(self) -> np.ndarray:
        return self.rows(TEST)

    def counts(self) -> tuple[int, int, int]:
        return tuple(int((self.role == r).sum()) for r in (TRAIN, DEV, TEST))


def split_counts(n: int) -> tuple[int, int, int]:
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_dev = int(round(SPLIT_FRACTIONS[1] * n))
    return n_train, n_dev, n - n_train - n_dev


def split(ds: FdcDataset | int, strategy: str = "random", seed: int = 0) -> SplitAssignment:
    """Assign every sample to train/dev/test in 70/15/15 proportion.

    ``random`` permutes indices with the seeded generator; ``chronological``
    orders samples by timestamp (ties by index) and cuts in order.
    """
    n = ds if isinstance(ds, int) else ds.n_samples
    if n < 20:
        raise TooFewSamples(f"need at least 20 samples to split, got {n}")
    if strategy == "random":
        order = np.random.default_rng(seed).permutation(n)
    elif strategy == "chronological":
        if isinstance(ds, int):
            raise DatasetError("chronological split needs timestamps")
        order = np.lexsort((np.arange(n), ds.timestamp))
    else:
        raise DatasetError(f"unknown split strategy {strategy!r}")
    n_train, n_dev, _ = split_counts(n)
    role = np.full(n, TEST, dtype=np.int8)
    role[order[:n_train]] = TRAIN
    role[order[n_train:n_train + n_dev]] = DEV
    return SplitAssignment(role, seed, strategy)


def _train_rows(ds: FdcDataset, split_: SplitAssignment | None) -> np.ndarray:
    return np.arange(ds.n_samples) if split_ is None else split_.train


# --- normalization ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalizationParams:
    feature_ids: tuple[str, ...]
    minimum: np.ndarray
    maximum: np.ndarray
    constant: np.ndarray  # bool per feature
    scaled: np.ndarray  # bool per feature; False for categorical/indicator columns


def normalize(ds: FdcDataset, split_: SplitAssignment | None = None) -> tuple[FdcDataset, NormalizationParams]:
    """Min-max scale continuous features into [0, 1] using training rows only.

    Dev/test values outside the training range are clipped. A feature that is
    constant on the training rows maps to 0.5 everywhere and is flagged.
    """
    rows = _train_rows(ds, split_)
    m = ds.n_features
    lo = np.zeros(m)
    hi = np.ones(m)
    constant = np.zeros(m, dtype=bool)
    scaled = np.array([f.kind == CONTINUOUS for f in ds.feature_meta])
    values = ds.values.copy()
    for j in np.flatnonzero(scaled):
        observed = ds.values[rows, j][ds.mask[rows, j]]
        if observed.size == 0:
            raise DatasetError(f"feature {ds.feature_meta[j].id!r} has no observed training value")
        lo[j], hi[j] = observed.min(), observed.max()
        col = values[:, j]
        obs = ds.mask[:, j]
        if hi[j] == lo[j]:
            constant[j] = True
            col[obs] = 0.5
        else:
            col[obs] = np.clip((col[obs] - lo[j]) / (hi[j] - lo[j]), 0.0, 1.0)
    params = NormalizationParams(ds.feature_ids, lo, hi, constant, scaled)
    return ds.with_values(values), params


def denormalize(ds: FdcDataset, params: NormalizationParams) -> FdcDataset:
    values = ds.values.copy()
    for j in np.flatnonzero(params.scaled & ~params.constant):
        values[:, j] = values[:, j] * (params.maximum[j] - params.minimum[j]) + params.minimum[j]
    for j in np.flatnonzero(params.constant):
        values[ds.mask[:, j], j] = params.minimum[j]
    return ds.with_values(values)


# --- categorical encoding --------------------------------------------------

def encode_categoricals(ds: FdcDataset, split_: SplitAssignment | None = None) -> FdcDataset:
    """One-hot encode categorical features on their training-seen levels.

    Unseen levels become all-zero rows; a missing source entry marks every
    indicator column of that feature missing.
    """
    rows = _train_rows(ds, split_)
    cols, masks, meta = [], [], []
    for j, f in enumerate(ds.feature_meta):
        if f.kind != CATEGORICAL:
            cols.append(ds.values[:, j])
            masks.append(ds.mask[:, j])
            meta.append(f)
            continue
        obs = ds.mask[:, j]
        codes = np.where(obs, ds.values[:, j], -1).astype(np.int64)
        seen = sorted(set(codes[rows][obs[rows]].tolist()))
        for code in seen:
            label = f.levels[code] if code < len(f.levels) else str(code)
            col = np.where(obs, (codes == code).astype(float), np.nan)
            cols.append(col)
            masks.append(obs.copy())
            meta.append(FeatureMeta(f"{f.id}={label}", INDICATOR, f.id))
    if not cols:
        return ds
    values = np.column_stack(cols)
    mask = np.column_stack(masks)
    return replace(ds, values=values, mask=mask, feature_meta=tuple(meta))


def preprocess(ds: FdcDataset, split_: SplitAssignment | None = None) -> FdcDataset:
    """One-hot encode, then min-max normalize, both fitted on training rows."""
    return normalize(encode_categoricals(ds, split_), split_)[0]


# --- missingness statistics ------------------------------------------------

@dataclass(frozen=True)
class MissingnessHistogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def format(self) -> str:
        lines = []
        total = max(sum(self.counts), 1)
        for (a, b), c in zip(zip(self.bin_edges[:-1], self.bin_edges[1:]), self.counts):
            lines.append(f"[{a:4.2f}, {b:4.2f}{']' if b == 1.0 else ')'} {c:5d}  {'#' * round(40 * c / total)}")
        return "\n".join(lines)


def availability(mask: np.ndarray) -> np.ndarray:
    """Observed fraction per feature."""
    return mask.mean(axis=0) if mask.shape[0] else np.zeros(mask.shape[1])


def missingness_histogram(ds_or_mask, bins: int = 10) -> MissingnessHistogram:
    """Bin features by their data-availability ratio (observed count / N).

    Bins are equal-width on [0, 1]; the last bin is closed on the right.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    mask = ds_or_mask.mask if isinstance(ds_or_mask, FdcDataset) else np.asarray(ds_or_mask, bool)
    ratio = availability(mask)
    edges = np.linspace(0.0, 1.0, bins + 1)
    # the small offset keeps exact edge ratios such as 3/10 out of the bin below
    idx = np.minimum(np.floor(ratio * bins + 1e-9).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return MissingnessHistogram(tuple(float(e) for e in edges), tuple(int(c) for c in counts))


# --- CSV ingestion / emission ----------------------------------------------

def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_csv(ds: FdcDataset, path: str | Path, sidecar: str | Path | None = None) -> None:
    """Write the dataset as CSV plus a JSON sidecar of feature kinds.

    Categorical cells hold their level label; empty cells are missing.
    """
    path = Path(path)
    sidecar = Path(sidecar) if sidecar else path.with_suffix(".features.json")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(RESERVED_COLUMNS) + list(ds.feature_ids))
        for i in range(ds.n_samples):
            row = [str(ds.tool_id[i]), _fmt(ds.timestamp[i]), _fmt(ds.target[i])]
            for j, f in enumerate(ds.feature_meta):
                if not ds.mask[i, j]:
                    row.append("")
                elif f.kind == CATEGORICAL:
                    row.append(f.levels[int(ds.values[i, j])])
                else:
                    row.append(repr(float(ds.values[i, j])))
            w.writerow(row)
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"features": [f.to_dict() for f in ds.feature_meta]}, fh, indent=1)
        fh.write("\n")


def read_csv(path: str | Path, sidecar: str | Path | None = None) -> FdcDataset:
    path = Path(path)
    sidecar = Path(sidecar) if sidecar else path.with_suffix(".features.json")
    kinds: dict[str, FeatureMeta] = {}
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as fh:
            for d in json.load(fh)["features"]:
                kinds[d["id"]] = FeatureMeta.from_dict(d)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if tuple(header[:3]) != RESERVED_COLUMNS:
        raise DatasetError(f"expected leading columns {RESERVED_COLUMNS}, got {tuple(header[:3])}")
    ids = header[3:]
    n, m = len(rows), len(ids)
    values = np.full((n, m), np.nan)
    meta = []
    for j, fid in enumerate(ids):
        f = kinds.get(fid, FeatureMeta(fid, CONTINUOUS, fid))
        cells = [r[3 + j] for r in rows]
        if f.kind == CATEGORICAL:
            levels = list(f.levels)
            for c in cells:
                if c != "" and c not in levels:
                    levels.append(c)
            lookup = {lv: k for k, lv in enumerate(levels)}
            values[:, j] = [lookup[c] if c != "" else np.nan for c in cells]
            f = replace(f, levels=tuple(levels))
        else:
            values[:, j] = [float(c) if c != "" else np.nan for c in cells]
        meta.append(f)
    return make_dataset(values, meta, [r[0] for r in rows], [float(r[1]) for r in rows],
                        [float(r[2]) for r in rows])
