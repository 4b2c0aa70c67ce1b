"""Gamma regression with log-linear scale, fitted by Newton's method."""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammainc, gammaln, polygamma

from ..core import Dataset
from .base import Basis, FitReport, check_rank, _rows


class GammaRegressionModel:
    """Y | x ~ Gamma(shape, scale = exp(z' beta))."""

    family = "gamma"

    def __init__(self, coef, shape: float, basis: Basis):
        self.coef = np.asarray(coef, dtype=float)
        self.shape = float(shape)
        self.basis = basis

    def scale(self, X) -> np.ndarray:
        return np.exp(self.basis.design(X) @ self.coef)

    def mean(self, X) -> np.ndarray:
        return self.shape * self.scale(X)

    def cdf(self, y, X):
        y, s = _rows(y, self.scale(X))
        return gammainc(self.shape, np.maximum(y, 0.0) / s)

    @property
    def theta(self) -> dict:
        return {"coef": self.coef.tolist(), "shape": self.shape}

    def to_dict(self):
        return {"family": self.family, **self.theta, "basis": self.basis.to_list()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["coef"], d["shape"], Basis.from_list(d["basis"]))


def gamma_loglik(params, Z, y) -> float:
    """Log-likelihood at ``params = (beta..., log_shape)``."""
    beta, a = params[:-1], np.exp(params[-1])
    eta = Z @ beta
    return float(np.sum(-gammaln(a) - a * eta + (a - 1) * np.log(y) - y * np.exp(-eta)))


def gamma_score(params, Z, y) -> np.ndarray:
    beta, a = params[:-1], np.exp(params[-1])
    eta = Z @ beta
    u = y * np.exp(-eta)
    gb = Z.T @ (u - a)
    ga = np.sum(-digamma(a) - eta + np.log(y))
    return np.append(gb, a * ga)


def _hessian(params, Z, y):
    beta, a = params[:-1], np.exp(params[-1])
    eta = Z @ beta
    u = y * np.exp(-eta)
    n = y.size
    Hbb = -(Z * u[:, None]).T @ Z
    ga = np.sum(-digamma(a) - eta + np.log(y))
    Haa = a * ga - a * a * n * polygamma(1, a)
    Hba = -a * Z.sum(0)
    H = np.zeros((Z.shape[1] + 1,) * 2)
    H[:-1, :-1] = Hbb
    H[:-1, -1] = H[-1, :-1] = Hba
    H[-1, -1] = Haa
    return H


def fit_gamma_glm(train: Dataset, basis: Basis | None = None, max_iter: int = 200, tol: float = 1e-10):
    """Maximum likelihood for shape and log-linear scale coefficients.

    Starts from least squares on log y and a moment estimate of the shape,
    then runs damped Newton steps (falling back to gradient ascent when the
    Hessian is not negative definite) with step halving.
    """
    if np.any(train.y <= 0):
        raise ValueError("gamma regression needs strictly positive outcomes")
    basis = basis if basis is not None else Basis.linear(train.dim)
    Z = basis.design(train.X)
    check_rank(Z, basis.names)
    y = train.y
    b0 = np.linalg.lstsq(Z, np.log(y), rcond=None)[0]
    ratio = y / np.exp(Z @ b0)
    a0 = max(ratio.mean() ** 2 / max(ratio.var(), 1e-12), 1e-3)
    b0[0] += np.log(ratio.mean()) - np.log(a0)  # intercept absorbs the mean and shape
    params = np.append(b0, np.log(a0))
    ll = gamma_loglik(params, Z, y)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = gamma_score(params, Z, y)
        H = _hessian(params, Z, y)
        try:
            step = np.linalg.solve(-H, g)
            if g @ step <= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = g / max(1.0, np.abs(g).max())
        t = 1.0
        while t > 1e-12:
            cand = params + t * step
            ll_new = gamma_loglik(cand, Z, y)
            if np.isfinite(ll_new) and ll_new >= ll:
                break
            t /= 2
        else:
            break
        gain = ll_new - ll
        params, ll = cand, ll_new
        trace.append(ll)
        if np.max(np.abs(t * step)) < tol or gain < tol * (1 + abs(ll)):
            converged = np.max(np.abs(gamma_score(params, Z, y))) < 1e-4 * max(1.0, y.size)
            break
    model = GammaRegressionModel(params[:-1], np.exp(params[-1]), basis)
    return model, FitReport("gamma", model.theta, ll, it, bool(converged), trace)
