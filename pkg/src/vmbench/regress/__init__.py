"""Six regressors behind one fit / predict / importance interface."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .base import (DEFAULT_HYPERPARAMS, KINDS, LINEAR_KINDS, NONLINEAR_KINDS, ConstantTruth,
                   Divergence, FeatureMismatch, RegressError, RegressorSpec, TrainedModel, accuracy,
                   check_columns, r2_score)
from .boosting import fit_gradient_boosting, gb_predict, truncate
from .linear import fit_bayesian_ridge, fit_linear_svr, fit_lls, fit_pls, linear_predict
from .neural import fit_neural_network, nn_predict

__all__ = [
    "DEFAULT_HYPERPARAMS", "KINDS", "LINEAR_KINDS", "NONLINEAR_KINDS", "ConstantTruth", "Divergence",
    "FeatureMismatch", "RegressError", "RegressorSpec", "TrainedModel", "accuracy", "fit",
    "fit_bayesian_ridge", "fit_gradient_boosting", "fit_linear_svr", "fit_lls",
    "fit_neural_network", "fit_pls", "load_model", "predict", "r2_score", "save_model", "truncate",
]


def fit(spec: RegressorSpec, X, y, feature_ids: Sequence[str], X_dev=None, y_dev=None) -> TrainedModel:
    """Fit ``spec`` on (X, y). The dev split is only used for NN early stopping."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.isfinite(X).all():
        raise RegressError("X must be complete (impute first)")
    if len(feature_ids) != X.shape[1]:
        raise FeatureMismatch("feature_ids length != number of columns")
    if spec.kind == "lls":
        return fit_lls(X, y, feature_ids, spec=spec)
    if spec.kind == "pls":
        return fit_pls(X, y, feature_ids, spec=spec)
    if spec.kind == "bayesian_ridge":
        return fit_bayesian_ridge(X, y, feature_ids, spec=spec)
    if spec.kind == "linear_svr":
        return fit_linear_svr(X, y, feature_ids, spec=spec)
    if spec.kind == "gradient_boosting":
        return fit_gradient_boosting(X, y, feature_ids, spec=spec)
    return fit_neural_network(X, y, feature_ids, spec=spec, X_dev=X_dev, y_dev=y_dev)


def predict(model: TrainedModel, X, columns: Sequence[str] | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    check_columns(model, X, columns)
    if model.spec.kind == "gradient_boosting":
        return gb_predict(model, X)
    if model.spec.kind == "neural_network":
        return nn_predict(model, X)
    return linear_predict(model.parameters, X)


# --- serialization ---------------------------------------------------------
# JSON with arrays as {"__array__": dtype, "data": [...]}. Floats go through
# repr-exact JSON numbers, so a round trip reproduces predictions bit for bit.

def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": str(obj.dtype), "shape": list(obj.shape), "data": obj.ravel().tolist()}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["data"], dtype=obj["__array__"]).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "spec": model.spec.to_dict(),
        "feature_ids": list(model.feature_ids),
        "parameters": _encode(model.parameters),
        "importance": _encode(model.importance) if model.importance is not None else None,
        "info": _encode(model.info),
    }


def model_from_dict(d: dict) -> TrainedModel:
    imp = _decode(d["importance"]) if d.get("importance") is not None else None
    return TrainedModel(RegressorSpec.from_dict(d["spec"]), tuple(d["feature_ids"]),
                        _decode(d["parameters"]), imp, _decode(d.get("info", {})))


def save_model(model: TrainedModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path: str | Path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
