"""Fully connected ReLU network trained by momentum SGD with early stopping."""

from __future__ import annotations

import numpy as np

from .base import Divergence, RegressorSpec, TrainedModel

MOMENTUM = 0.9
MAX_RESTARTS = 3


def glorot_init(sizes, rng: np.random.Generator) -> list[np.ndarray]:
    """Flat list [W1, b1, W2, b2, ...] with Glorot-uniform weights and zero biases."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: list[np.ndarray], X: np.ndarray) -> np.ndarray:
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        h = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h[:, 0]


def loss_and_grad(params: list[np.ndarray], X: np.ndarray, y: np.ndarray):
    """Half mean squared error and its gradient by backpropagation."""
    n_layers = len(params) // 2
    acts = [X]
    h = X
    for k in range(n_layers):
        h = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    err = acts[-1][:, 0] - y
    n = len(y)
    loss = 0.5 * float(err @ err) / n
    grads = [None] * len(params)
    delta = err[:, None] / n
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params[2 * k].T) * (acts[k] > 0)
    return loss, grads


def _half_mse(params, X, y) -> float:
    e = forward(params, X) - y
    return 0.5 * float(e @ e) / len(y)


def _scaler(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return mu, sd


def fit_neural_network(X, y, feature_ids, spec: RegressorSpec | None = None,
                       X_dev=None, y_dev=None) -> TrainedModel:
    """Early stopping watches the dev loss; without a dev set, 10% of the
    training rows (seeded) are held out for it. The best-dev weights are kept."""
    spec = spec or RegressorSpec("neural_network")
    hp = spec.hyperparams
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X_dev is None:
        perm = np.random.default_rng(spec.seed + 7919).permutation(len(y))
        n_hold = max(1, len(y) // 10)
        X_dev, y_dev = X[perm[:n_hold]], y[perm[:n_hold]]
        X, y = X[perm[n_hold:]], y[perm[n_hold:]]
    xm, xs = _scaler(X)
    ym = float(y.mean())
    ys = float(y.std()) or 1.0
    Xt = (X - xm) / xs
    yt = (y - ym) / ys
    Xd = (np.asarray(X_dev, dtype=float) - xm) / xs
    yd = (np.asarray(y_dev, dtype=float) - ym) / ys

    sizes = (X.shape[1], *hp["hidden_layer_sizes"], 1)
    init = glorot_init(sizes, np.random.default_rng(spec.seed))
    lr = float(hp["learning_rate"])
    bs = int(hp["batch_size"])
    n = len(yt)
    for restart in range(MAX_RESTARTS + 1):
        shuffle = np.random.default_rng(spec.seed + 1)
        params = [p.copy() for p in init]
        vel = [np.zeros_like(p) for p in init]
        best = _half_mse(params, Xd, yd)
        best_params = [p.copy() for p in params]
        best_epoch, wait, epochs = 0, 0, 0
        diverged = False
        for epoch in range(1, int(hp["max_epochs"]) + 1):
            epochs = epoch
            order = shuffle.permutation(n)
            for s in range(0, n, bs):
                idx = order[s:s + bs]
                loss, grads = loss_and_grad(params, Xt[idx], yt[idx])
                if not np.isfinite(loss) or loss > 1e12:
                    diverged = True
                    break
                for p, v, g in zip(params, vel, grads):
                    v *= MOMENTUM
                    v -= lr * g
                    p += v
            if diverged:
                break
            dev_loss = _half_mse(params, Xd, yd)
            if not np.isfinite(dev_loss):
                diverged = True
                break
            if dev_loss < best * (1.0 - 1e-4):
                best, best_epoch, wait = dev_loss, epoch, 0
                best_params = [p.copy() for p in params]
            else:
                wait += 1
                if wait >= int(hp["patience"]):
                    break
        if not diverged:
            break
        lr *= 0.5
    else:
        raise Divergence("neural network diverged after 3 learning-rate halvings")
    parameters = {"layers": best_params, "x_mean": xm, "x_scale": xs, "y_mean": ym, "y_scale": ys}
    info = {"restarts": restart, "epochs": epochs, "best_epoch": best_epoch, "dev_loss": best}
    return TrainedModel(spec, tuple(feature_ids), parameters, None, info)


def nn_predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    p = model.parameters
    Xt = (X - p["x_mean"]) / p["x_scale"]
    return forward(p["layers"], Xt) * p["y_scale"] + p["y_mean"]
