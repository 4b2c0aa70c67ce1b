"""Linear working models: Gaussian least squares, logistic weights, quantile LP."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import expit, log_expit

from ..core import Dataset
from .base import (SIGMA_FLOOR, Basis, FitReport, LinearGaussianModel, WeightModel,
                   check_rank)


def _basis(train_or_X, basis):
    X = train_or_X.X if isinstance(train_or_X, Dataset) else np.atleast_2d(train_or_X)
    return basis if basis is not None else Basis.linear(X.shape[1])


def fit_gaussian_lm(train: Dataset, basis: Basis | None = None):
    """Ordinary least squares with the ML residual scale (RSS / n)."""
    basis = _basis(train, basis)
    Z = basis.design(train.X)
    check_rank(Z, basis.names)
    coef, *_ = np.linalg.lstsq(Z, train.y, rcond=None)
    resid = train.y - Z @ coef
    sigma = max(float(np.sqrt(np.mean(resid ** 2))), SIGMA_FLOOR)
    model = LinearGaussianModel(coef, sigma, basis)
    n = train.n
    ll = -0.5 * n * (np.log(2 * np.pi * sigma ** 2) + 1.0)
    return model, FitReport("linear-gaussian", model.theta, float(ll), 1, True)


# ---------------------------------------------------------------------------
# logistic regression for covariate-shift weights


def logistic_loglik(beta, Z, labels, penalty=0.0):
    eta = Z @ beta
    ll = np.sum(labels * log_expit(eta) + (1 - labels) * log_expit(-eta))
    return ll - 0.5 * penalty * np.sum(beta[1:] ** 2)


def logistic_score(beta, Z, labels, penalty=0.0):
    g = Z.T @ (labels - expit(Z @ beta))
    g[1:] -= penalty * beta[1:]
    return g


def _newton_logistic(Z, labels, penalty, max_iter=100, tol=1e-10):
    beta = np.zeros(Z.shape[1])
    p1 = labels.mean()
    beta[0] = np.log(p1 / (1 - p1))
    ll = logistic_loglik(beta, Z, labels, penalty)
    trace = [ll]
    P = np.zeros(Z.shape[1])
    P[1:] = penalty
    for it in range(1, max_iter + 1):
        p = expit(Z @ beta)
        g = logistic_score(beta, Z, labels, penalty)
        H = (Z * (p * (1 - p))[:, None]).T @ Z + np.diag(P)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = logistic_loglik(cand, Z, labels, penalty)
            if ll_new >= ll - 1e-12 or t < 1e-10:
                break
            t /= 2
        beta, gain, ll = cand, ll_new - ll, ll_new
        trace.append(ll)
        if np.max(np.abs(t * step)) < tol or abs(gain) < tol * (1 + abs(ll)):
            return beta, ll, it, True, trace
    return beta, ll, max_iter, False, trace


def fit_logistic(X, labels, basis: Basis | None = None, max_iter: int = 100):
    """Maximum-likelihood logit of ``labels`` (1 = test group) on ``X``.

    Returns a :class:`WeightModel` with w(x) = exp(beta' x~) * n0 / n1 and a
    :class:`FitReport`. On non-convergence or diverging coefficients (complete
    separation) the fit is redone with a ridge penalty of 1e-4 and
    ``flags["ridge"]`` is set.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels, dtype=float).ravel()
    if not (np.any(labels == 1) and np.any(labels == 0)):
        raise ValueError("both labels must be present")
    basis = _basis(X, basis)
    Z = basis.design(X)
    check_rank(Z, basis.names)
    beta, ll, it, ok, trace = _newton_logistic(Z, labels, 0.0, max_iter)
    flags = {"ridge": False}
    separated = np.all(np.abs(expit(Z @ beta) - labels) < 1e-6)
    if not ok or separated or np.max(np.abs(beta)) > 1e3:
        beta, ll, it, ok, trace = _newton_logistic(Z, labels, 1e-4, max_iter)
        flags["ridge"] = True
    n1 = labels.sum()
    n0 = labels.size - n1
    wm = WeightModel(lambda Xn: basis.design(Xn) @ beta, n0 / n1)
    wm.coef = beta
    wm.basis = basis
    rep = FitReport("logistic", {"coef": beta.tolist(), "normalizer": n0 / n1}, float(ll), it, ok,
                    trace, flags)
    return wm, rep


# ---------------------------------------------------------------------------
# linear quantile regression


def pinball_loss(resid, level) -> float:
    resid = np.asarray(resid, dtype=float)
    return float(np.sum(np.where(resid >= 0, level * resid, (level - 1) * resid)))


def _quantile_lp(Z, y, level):
    n, p = Z.shape
    # variables: beta (free), u+ >= 0, u- >= 0 ; Z beta + u+ - u- = y
    cost = np.concatenate([np.zeros(p), np.full(n, level), np.full(n, 1 - level)])
    eye = sparse.identity(n, format="csr")
    A = sparse.hstack([sparse.csr_matrix(Z), eye, -eye], format="csr")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(cost, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"quantile LP failed: {res.message}")
    return res.x[:p], res


def fit_linear_quantile(train: Dataset, level: float, basis: Basis | None = None):
    """Linear quantile regression at ``level`` solved exactly as a linear program."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    basis = _basis(train, basis)
    Z = basis.design(train.X)
    check_rank(Z, basis.names)
    coef, res = _quantile_lp(Z, train.y, level)
    loss = pinball_loss(train.y - Z @ coef, level)
    rep = FitReport("linear-quantile", {"coef": coef.tolist(), "level": level}, loss,
                    int(getattr(res, "nit", 0)), True)
    return coef, rep


class LinearQuantileModel:
    """Per-level linear quantile fits, refit lazily at unseen levels.

    Predictions across levels are sorted per row so quantiles never cross.
    """

    supported_grid = None

    def __init__(self, train: Dataset, basis: Basis | None = None, levels=()):
        self.train = train
        self.basis = _basis(train, basis)
        self.coefs: dict[float, np.ndarray] = {}
        for t in levels:
            self._coef(t)

    def _coef(self, t):
        key = round(float(t), 12)
        if key not in self.coefs:
            self.coefs[key], _ = fit_linear_quantile(self.train, key, self.basis)
        return self.coefs[key]

    def predict_quantiles(self, X, levels) -> np.ndarray:
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        Z = self.basis.design(X)
        # rearrange over every fitted level, then read off the requested ones
        for t in levels:
            self._coef(t)
        keys = sorted(self.coefs)
        Q = np.sort(np.column_stack([Z @ self.coefs[k] for k in keys]), axis=1)
        pos = [keys.index(round(float(t), 12)) for t in levels]
        return Q[:, pos]
