"""Linear regressors: least squares, PLS (NIPALS), Bayesian ridge, linear SVR.

All four predict with ``X @ coef + intercept``. Each fits on centred columns
and recovers the intercept from the means.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .base import Divergence, RegressorSpec, TrainedModel, feature_std, normalize_importance


def _center(X, y):
    xm = X.mean(axis=0)
    ym = float(y.mean())
    return X - xm, y - ym, xm, ym


def _model(spec, feature_ids, coef, xm, ym, importance, **info) -> TrainedModel:
    coef = np.asarray(coef, dtype=float)
    params = {"coef": coef, "intercept": float(ym - xm @ coef)}
    return TrainedModel(spec, tuple(feature_ids), params, importance, info)


def _scaled_coef_importance(coef, X):
    return normalize_importance(np.abs(coef) * feature_std(X), X)


def linear_predict(params: dict, X: np.ndarray) -> np.ndarray:
    return X @ params["coef"] + params["intercept"]


def fit_lls(X, y, feature_ids, spec: RegressorSpec | None = None) -> TrainedModel:
    """Minimum-norm least squares via SVD (rank deficiency handled by the pseudo-inverse)."""
    spec = spec or RegressorSpec("lls")
    Xc, yc, xm, ym = _center(X, y)
    coef, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    return _model(spec, feature_ids, coef, xm, ym, _scaled_coef_importance(coef, X))


def nipals_pls1(Xc: np.ndarray, yc: np.ndarray, n_components: int):
    """Single-response NIPALS on centred data.

    Returns weights W, loadings P, y-loadings q, score norms t't, and the
    number of components actually extracted (fewer if a score vector
    collapses to zero).
    """
    n, m = Xc.shape
    X = Xc.copy()
    y = yc.copy()
    W = np.zeros((m, n_components))
    P = np.zeros((m, n_components))
    q = np.zeros(n_components)
    tt = np.zeros(n_components)
    scale = max(float(np.abs(Xc).max(initial=0.0)), 1.0) * max(float(np.abs(yc).max(initial=0.0)), 1.0)
    a = 0
    for a in range(n_components):
        w = X.T @ y
        nw = np.linalg.norm(w)
        if nw <= 1e-12 * scale * n:
            break
        w /= nw
        t = X @ w
        t2 = float(t @ t)
        if t2 <= 1e-24 * scale * n:
            break
        p = X.T @ t / t2
        qa = float(y @ t) / t2
        X -= np.outer(t, p)
        y -= qa * t
        W[:, a], P[:, a], q[a], tt[a] = w, p, qa, t2
    else:
        a = n_components
    return W[:, :a], P[:, :a], q[:a], tt[:a], a


def vip_scores(W: np.ndarray, q: np.ndarray, tt: np.ndarray) -> np.ndarray:
    """Variable importance in projection for a PLS1 model."""
    m = W.shape[0]
    if W.shape[1] == 0:
        return np.zeros(m)
    ss = q ** 2 * tt
    total = ss.sum()
    if total <= 0:
        return np.zeros(m)
    wn = W / np.linalg.norm(W, axis=0, keepdims=True)
    return np.sqrt(m * (wn ** 2 @ ss) / total)


def fit_pls(X, y, feature_ids, n_components: int | None = None, spec: RegressorSpec | None = None) -> TrainedModel:
    spec = spec or RegressorSpec("pls", {"n_components": n_components or 2})
    k = int(spec.hyperparams["n_components"])
    Xc, yc, xm, ym = _center(X, y)
    W, P, q, tt, a = nipals_pls1(Xc, yc, k)
    if a:
        coef = W @ np.linalg.solve(P.T @ W, q)
    else:
        coef = np.zeros(X.shape[1])
    imp = normalize_importance(vip_scores(W, q, tt), X)
    return _model(spec, feature_ids, coef, xm, ym, imp, components=a, collapsed=a < k)


def fit_bayesian_ridge(X, y, feature_ids, spec: RegressorSpec | None = None) -> TrainedModel:
    """Evidence-maximising Bayesian ridge.

    Weight prior precision ``alpha`` and noise precision ``beta`` follow the
    fixed-point updates alpha = gamma / |m|^2, beta = (N - gamma) / RSS. With a
    fixed ``alpha`` hyperparameter only beta is updated.
    """
    spec = spec or RegressorSpec("bayesian_ridge")
    hp = spec.hyperparams
    Xc, yc, xm, ym = _center(X, y)
    n = X.shape[0]
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    Uty = U.T @ yc
    s2 = s * s
    fixed = hp.get("alpha")
    var_y = float(yc @ yc) / n
    alpha = float(fixed) if fixed is not None else 1.0
    beta = 1.0 / var_y if var_y > 0 else 1.0
    tiny = np.finfo(float).tiny
    it = 0
    for it in range(1, int(hp["max_iter"]) + 1):
        ratio = alpha / beta
        coef = Vt.T @ (s / (s2 + ratio) * Uty)
        gamma = float(np.sum(s2 / (s2 + ratio)))
        rss = float(np.sum((yc - Xc @ coef) ** 2))
        new_alpha = alpha if fixed is not None else gamma / max(float(coef @ coef), tiny)
        new_beta = max(n - gamma, 1e-12) / max(rss, tiny)
        done = (abs(new_alpha - alpha) <= hp["tol"] * abs(alpha)
                and abs(new_beta - beta) <= hp["tol"] * abs(beta))
        alpha, beta = new_alpha, new_beta
        if done:
            break
    coef = Vt.T @ (s / (s2 + alpha / beta) * Uty)
    return _model(spec, feature_ids, coef, xm, ym, _scaled_coef_importance(coef, X),
                  alpha=alpha, beta=beta, iterations=it)


@njit(cache=True)
def _svr_sgd(X, y, perms, eps, lam, eta0, b0):
    """Per-sample subgradient steps on lam/2 |w|^2 + mean eps-insensitive loss.

    Step size eta0 / sqrt(t); returns the running average of the iterates
    after the first epoch (the last iterate if only one epoch ran).
    """
    n, m = X.shape
    w = np.zeros(m)
    b = b0
    wa = np.zeros(m)
    ba = 0.0
    na = 0
    t = 0
    for ep in range(perms.shape[0]):
        for r in range(n):
            i = perms[ep, r]
            t += 1
            eta = eta0 / math.sqrt(t)
            f = b
            for j in range(m):
                f += X[i, j] * w[j]
            res = y[i] - f
            g = 0.0
            if res > eps:
                g = -1.0
            elif res < -eps:
                g = 1.0
            for j in range(m):
                w[j] -= eta * (lam * w[j] + g * X[i, j])
            b -= eta * g
            if ep > 0 or perms.shape[0] == 1:
                na += 1
                for j in range(m):
                    wa[j] += (w[j] - wa[j]) / na
                ba += (b - ba) / na
        if not math.isfinite(b):
            return wa, ba, False
    for j in range(m):
        if not math.isfinite(wa[j]):
            return wa, ba, False
    return wa, ba, math.isfinite(ba)


def svr_objective(coef, intercept, X, y, epsilon, C) -> float:
    r = np.abs(y - (X @ coef + intercept))
    return 0.5 * float(coef @ coef) + C * float(np.maximum(r - epsilon, 0.0).sum())


def fit_linear_svr(X, y, feature_ids, epsilon=None, C=None, spec: RegressorSpec | None = None) -> TrainedModel:
    """Primal linear SVR by epoch-wise shuffled subgradient descent.

    The problem is solved on centred X and y scaled by its standard deviation
    (same minimiser, with C rescaled accordingly); the result is mapped back.
    """
    hp_in = {k: v for k, v in (("epsilon", epsilon), ("C", C)) if v is not None}
    spec = spec or RegressorSpec("linear_svr", hp_in)
    hp = spec.hyperparams
    Xc, _, xm, _ = _center(X, y)
    n = X.shape[0]
    sy = float(y.std()) or 1.0
    ys = y / sy
    eps = hp["epsilon"] / sy
    C_s = hp["C"] / sy
    # objective / (C_s n): lam/2 |w|^2 + mean loss
    lam = 1.0 / (C_s * n)
    rng = np.random.default_rng(spec.seed)
    perms = np.stack([rng.permutation(n) for _ in range(int(hp["max_epochs"]))]).astype(np.int64)
    scale = float(np.mean(np.sum(Xc * Xc, axis=1))) + 1.0
    eta0 = hp["learning_rate"] / scale
    b0 = float(np.median(ys))
    restarts = 0
    while True:
        w, b, ok = _svr_sgd(np.ascontiguousarray(Xc), ys, perms, eps, lam, eta0, b0)
        if ok:
            break
        restarts += 1
        if restarts > 3:
            raise Divergence("linear SVR diverged after 3 step-size halvings")
        eta0 *= 0.5
    coef = w * sy
    intercept = b * sy
    # fitted on centred X: shift the intercept back to raw coordinates
    model = TrainedModel(spec, tuple(feature_ids), {"coef": coef, "intercept": float(intercept - xm @ coef)},
                         _scaled_coef_importance(coef, X), {"restarts": restarts})
    return model
