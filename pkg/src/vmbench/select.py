"""Iterative importance-based feature elimination."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import regress
from .dataset import SplitAssignment
from .impute import ImputedDataset, mdar
from .tuning import SearchSpace, tune_fit

RATIO_HIGH, RATIO_LOW = 0.11, 0.08
NIF_HIGH, NIF_LOW = 200, 20
DEFAULT_STOP_NIF = 5


class SelectionError(ValueError):
    pass


def reduction_ratio(nif: int) -> float:
    """Fraction of features dropped per iteration: gentler at low NIF.

    0.11 at NIF >= 200, 0.08 at NIF <= 20, linear in log(NIF) in between.
    """
    if nif < 2:
        raise SelectionError("reduction_ratio needs nif >= 2")
    if nif >= NIF_HIGH:
        return RATIO_HIGH
    if nif <= NIF_LOW:
        return RATIO_LOW
    frac = math.log(nif / NIF_LOW) / math.log(NIF_HIGH / NIF_LOW)
    return RATIO_LOW + frac * (RATIO_HIGH - RATIO_LOW)


def n_dropped(nif: int) -> int:
    return max(1, math.ceil(reduction_ratio(nif) * nif))


def eliminate(importance, feature_ids: Sequence[str], nif: int | None = None) -> tuple[str, ...]:
    """Drop the ceil(ratio * nif) least important features, keeping input order.

    Among equal importances the higher-indexed feature goes first.
    """
    imp = np.asarray(importance, dtype=float)
    nif = len(feature_ids) if nif is None else nif
    if not (len(imp) == len(feature_ids) == nif):
        raise SelectionError("importance, feature_ids and nif disagree")
    idx = np.arange(nif)
    # ascending importance, then descending index
    drop_order = np.lexsort((-idx, imp))
    drop = set(drop_order[: n_dropped(nif)].tolist())
    return tuple(f for i, f in enumerate(feature_ids) if i not in drop)


@dataclass(frozen=True)
class SelectorPairing:
    """Which regressor ranks features for which regressor."""

    selector_kind: str
    regressor_kind: str

    def __post_init__(self):
        for k in (self.selector_kind, self.regressor_kind):
            if k not in regress.KINDS:
                raise SelectionError(f"unknown regressor kind {k!r}")
        if self.selector_kind != self.paired_selector(self.regressor_kind):
            raise SelectionError(f"{self.regressor_kind} must be paired with "
                                 f"{self.paired_selector(self.regressor_kind)} for selection")

    @staticmethod
    def paired_selector(regressor_kind: str) -> str:
        return "gradient_boosting" if regressor_kind == "neural_network" else regressor_kind

    @classmethod
    def for_regressor(cls, kind: str) -> "SelectorPairing":
        return cls(cls.paired_selector(kind), kind)

    @property
    def name(self) -> str:
        return self.regressor_kind


def _digest(model: regress.TrainedModel) -> str:
    blob = json.dumps(regress.model_to_dict(model)["parameters"], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class SelectionTrace:
    """One record per elimination iteration, in order of decreasing NIF.

    Each record carries nif, feature_ids, train/dev/test accuracy and r2,
    mdar, the tuned regressor and selector specs, their per-grid dev
    scores, and short digests of the fitted parameters.
    """

    pairing: SelectorPairing
    iterations: tuple[dict, ...]

    def __len__(self):
        return len(self.iterations)

    def column(self, key: str) -> list:
        return [it[key] for it in self.iterations]

    def best_dev_index(self) -> int:
        dev = self.column("dev_accuracy")
        return int(np.argmax(dev))  # first maximum

    def to_jsonl(self) -> str:
        return "".join(json.dumps(it, sort_keys=True) + "\n" for it in self.iterations)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "SelectionTrace":
        its = tuple(json.loads(line) for line in text.splitlines() if line.strip())
        if not its:
            raise SelectionError("empty trace")
        return cls(SelectorPairing(its[0]["selector_kind"], its[0]["regressor_kind"]), its)

    @classmethod
    def read(cls, path: str | Path) -> "SelectionTrace":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def _scores(model, X, y, rows):
    pred = regress.predict(model, X[rows])
    return float(regress.accuracy(y[rows], pred)), float(regress.r2_score(y[rows], pred))


def run_selection(imputed: ImputedDataset, pairing: SelectorPairing, split_: SplitAssignment,
                  search_space: SearchSpace | None = None, stop_nif: int = DEFAULT_STOP_NIF,
                  seed: int = 0, start_features: Sequence[str] | None = None,
                  progress: Callable[[dict], None] | None = None,
                  cache: dict | None = None) -> SelectionTrace:
    """Tune, score and shrink until the recorded NIF falls below ``stop_nif``.

    Tuning and elimination read only the train and dev rows; test rows are
    predicted for the record and nothing else.

    ``cache`` memoizes tuning results by (kind, feature ids). Share one dict
    only between runs on the same imputed data, split, space and seed: the
    gradient-boosting and neural-network pairings then walk the same
    selector path and the second run reuses the first one's fits.
    """
    if stop_nif < 1:
        raise SelectionError("stop_nif must be >= 1")
    space = search_space or SearchSpace.default()
    ds = imputed.dataset
    X = ds.values
    y = ds.target
    tr, dv, te = split_.train, split_.dev, split_.test
    fid_index = {f: j for j, f in enumerate(ds.feature_ids)}
    ids = tuple(start_features) if start_features is not None else ds.feature_ids
    records = []
    while True:
        cols = np.array([fid_index[f] for f in ids], dtype=np.int64)
        Xs = np.ascontiguousarray(X[:, cols])
        Xtr, Xdv = Xs[tr], Xs[dv]

        def tuned(kind):
            key = (kind, ids)
            if cache is not None and key in cache:
                return cache[key]
            res = tune_fit(kind, Xtr, y[tr], Xdv, y[dv], space, ids, seed)
            if cache is not None:
                cache[key] = res
            return res

        reg = tuned(pairing.regressor_kind)
        sel = reg if pairing.selector_kind == pairing.regressor_kind else tuned(pairing.selector_kind)
        rec = {"iteration": len(records), "nif": len(ids), "feature_ids": list(ids),
               "regressor_kind": pairing.regressor_kind, "selector_kind": pairing.selector_kind}
        for name, rows in (("train", tr), ("dev", dv), ("test", te)):
            acc, r2 = _scores(reg.model, Xs, y, rows)
            rec[f"{name}_accuracy"] = acc
            rec[f"{name}_r2"] = r2
        rec["mdar"] = mdar(imputed.provenance_mask, cols)
        rec["chosen_hyperparams"] = reg.spec.to_dict()
        rec["selector_hyperparams"] = sel.spec.to_dict()
        rec["dev_scores"] = list(reg.scores)
        rec["selector_dev_scores"] = list(sel.scores)
        rec["model_digest"] = _digest(reg.model)
        rec["selector_digest"] = _digest(sel.model)
        records.append(rec)
        if progress is not None:
            progress(rec)
        if len(ids) < stop_nif or len(ids) < 2:
            break
        ids = eliminate(sel.model.importance, ids)
    return SelectionTrace(pairing, tuple(records))
