"""Per-series ARIMA imputation.

Each (tool, sensor) series is bridged by linear interpolation, ARIMA orders
are picked by AIC, parameters come from the two-step Hannan-Rissanen
regression, and every gap is replaced by the model's one-step-ahead
prediction at that position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataset import FdcDataset, SplitAssignment
from .base import ImputedDataset, ImputerSpec, finish, train_flags, training_medians
from .simple import fill_series

MIN_OBSERVATIONS = 10


class NonStationarySeries(ArithmeticError):
    pass


@dataclass(frozen=True)
class ArimaFit:
    p: int
    d: int
    q: int
    const: float
    ar: np.ndarray
    ma: np.ndarray
    sigma2: float
    aic: float


def interpolate(x: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Linear interpolation across gaps, constant extension at both ends."""
    t = np.arange(len(x))
    return np.interp(t, t[observed], x[observed])


def _lagmat(x: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns x[t-1], ..., x[t-lags] for t = start .. len(x)-1."""
    n = len(x)
    return np.column_stack([x[start - i:n - i] for i in range(1, lags + 1)]) if lags else np.empty((n - start, 0))


def _stable(coefs: np.ndarray) -> bool:
    """True when all roots of z^k - c1 z^(k-1) - ... - ck lie strictly inside the unit circle."""
    k = coefs.size
    if k == 0 or not np.any(coefs):
        return True
    if k == 1:
        return abs(coefs[0]) < 1.0 - 1e-6
    companion = np.zeros((k, k))
    companion[0] = coefs
    companion[np.arange(1, k), np.arange(k - 1)] = 1.0
    return bool(np.all(np.abs(np.linalg.eigvals(companion)) < 1.0 - 1e-6))


def _ols(X: np.ndarray, y: np.ndarray):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid


def fit_hannan_rissanen(w: np.ndarray, max_p: int, max_q: int, d: int = 0) -> list[ArimaFit]:
    """Fit every ARMA(p, q) with p <= max_p, q <= max_q on one (differenced) series.

    All candidates share one estimation window so their AICs are comparable.
    Candidates that are non-stationary or non-invertible are dropped.
    """
    T = len(w)
    long_order = 0
    e = np.zeros(T)
    if max_q > 0:
        long_order = min(max(int(math.log(T) ** 2), 2 * max(max_p, max_q)), T // 4)
        if long_order < 1:
            max_q = 0
        else:
            Xl = np.column_stack([np.ones(T - long_order), _lagmat(w, long_order, long_order)])
            _, r = _ols(Xl, w[long_order:])
            e[long_order:] = r
    start = max(long_order + max_q, max_p)
    n_eff = T - start
    if n_eff < max_p + max_q + 3:
        return []
    y = w[start:]
    W = _lagmat(w, max_p, start)
    E = _lagmat(e, max_q, start)
    # every candidate design is a column subset of Z, so share its Gram matrix
    Z = np.column_stack([np.ones(n_eff), W, E])
    G = Z.T @ Z
    b = Z.T @ y
    fits = []
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            cols = [0, *range(1, 1 + p), *range(1 + max_p, 1 + max_p + q)]
            try:
                beta = np.linalg.solve(G[cols][:, cols], b[cols])
            except np.linalg.LinAlgError:
                beta, _ = _ols(Z[:, cols], y)
            r = y - Z[:, cols] @ beta
            sigma2 = float(r @ r) / n_eff
            if not np.isfinite(beta).all() or not math.isfinite(sigma2):
                continue
            ar, ma = beta[1:1 + p], beta[1 + p:]
            if not _stable(ar) or not _stable(-ma):
                continue
            aic = n_eff * math.log(max(sigma2, 1e-300)) + 2 * (p + q + 1)
            fits.append(ArimaFit(p, d, q, float(beta[0]), ar, ma, sigma2, aic))
    return fits


def select_order(y: np.ndarray, max_p: int, max_d: int, max_q: int) -> ArimaFit:
    """AIC-best ARIMA over the order grid. Ties keep the smaller (d, p, q)."""
    best = None
    for d in range(max_d + 1):
        w = np.diff(y, n=d) if d else y
        if len(w) < 3 or np.ptp(w) == 0:
            continue
        for fit in fit_hannan_rissanen(w, max_p, max_q, d):
            if best is None or fit.aic < best.aic:
                best = fit
    if best is None:
        raise NonStationarySeries("no admissible ARIMA order")
    return best


def one_step_predictions(y: np.ndarray, observed: np.ndarray, fit: ArimaFit) -> np.ndarray:
    """One-step-ahead predictions conditioned on past observations only.

    Inside a gap the lagged values are the model's own earlier predictions and
    the innovations there are zero, so nothing after position t informs the
    prediction at t. Positions before the first observation keep ``y``.
    """
    T = len(y)
    first = int(np.argmax(observed))
    ys = y.copy()  # observed where available, otherwise the running prediction
    e = np.zeros(T)
    pred = y.copy()
    phi_sum = float(fit.ar.sum()) if fit.p else 0.0
    mu = fit.const / (1.0 - phi_sum) if fit.d == 0 and abs(1.0 - phi_sum) > 1e-12 else 0.0
    for t in range(first + 1, T):
        if fit.d == 0:
            acc = fit.const
            for i in range(fit.p):
                s = t - 1 - i
                acc += fit.ar[i] * (ys[s] if s >= first else mu)
        else:
            acc = ys[t - 1] + fit.const
            for i in range(fit.p):
                s = t - 1 - i
                if s - 1 >= first:
                    acc += fit.ar[i] * (ys[s] - ys[s - 1])
        for j in range(fit.q):
            s = t - 1 - j
            if s > first:
                acc += fit.ma[j] * e[s]
        pred[t] = acc
        if observed[t]:
            e[t] = y[t] - acc
        else:
            ys[t] = acc
    return pred


def impute_series(y: np.ndarray, observed: np.ndarray, fit_observed: np.ndarray,
                  max_p: int, max_d: int, max_q: int, fallback: float) -> tuple[np.ndarray, str]:
    """Impute one series; returns (values, status)."""
    out = y.copy()
    miss = ~observed
    if not miss.any():
        return out, "complete"
    if fit_observed.sum() < MIN_OBSERVATIONS:
        return fill_series(y[:, None], observed[:, None], [fallback])[:, 0], "short"
    provisional_fit = interpolate(y, fit_observed)
    if np.ptp(provisional_fit) == 0 and np.ptp(y[observed]) == 0:
        out[miss] = y[observed][0]
        return out, "constant"
    try:
        fit = select_order(provisional_fit, max_p, max_d, max_q)
    except (NonStationarySeries, np.linalg.LinAlgError):
        return fill_series(y[:, None], observed[:, None], [fallback])[:, 0], "nonstationary"
    pred = one_step_predictions(interpolate(y, observed), observed, fit)
    if not np.isfinite(pred[miss]).all():
        return fill_series(y[:, None], observed[:, None], [fallback])[:, 0], "nonfinite"
    out[miss] = pred[miss]
    return out, f"arima({fit.p},{fit.d},{fit.q})"


def impute_arima(ds: FdcDataset, max_p: int = 3, max_d: int = 1, max_q: int = 3,
                 split_: SplitAssignment | None = None, spec: ImputerSpec | None = None) -> ImputedDataset:
    spec = spec or ImputerSpec("arima", {"max_p": max_p, "max_d": max_d, "max_q": max_q})
    p, d, q = (int(spec.params[k]) for k in ("max_p", "max_d", "max_q"))
    med = training_medians(ds, split_)
    is_train = train_flags(ds, split_)
    values = ds.values.copy()
    status: dict[str, int] = {}
    for tool in ds.tools():
        rows = ds.tool_rows(tool)
        fit_rows = is_train[rows]
        for j in range(ds.n_features):
            obs = ds.mask[rows, j]
            out, st = impute_series(ds.values[rows, j], obs, obs & fit_rows, p, d, q, med[j])
            values[rows, j] = out
            key = st if not st.startswith("arima") else "fitted"
            status[key] = status.get(key, 0) + 1
    return finish(ds, values, spec, {"series_status": dict(sorted(status.items()))})
