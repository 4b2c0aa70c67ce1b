"""Finite mixture of Gaussian linear regressions fitted by EM."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, ndtr

from ..core import Dataset
from .base import Basis, FitReport, check_rank, _rows


class EMMonotonicityError(AssertionError):
    pass


class MixtureRegressionModel:
    """F(y | x) = sum_k pi_k Phi((y - z' beta_k) / sigma_k)."""

    family = "mixture-lm"

    def __init__(self, weights, coefs, sigmas, basis: Basis):
        self.weights = np.asarray(weights, dtype=float)
        self.coefs = np.atleast_2d(np.asarray(coefs, dtype=float))
        self.sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), self.weights.shape).copy()
        self.basis = basis

    def component_means(self, X) -> np.ndarray:
        return self.basis.design(X) @ self.coefs.T

    def mean(self, X) -> np.ndarray:
        return self.component_means(X) @ self.weights

    def cdf(self, y, X):
        M = self.component_means(X)
        y = np.asarray(y, dtype=float)
        out = 0.0
        for k in range(self.weights.size):
            yy, mu = _rows(y, M[:, k])
            out = out + self.weights[k] * ndtr((yy - mu) / self.sigmas[k])
        return np.clip(out, 0.0, 1.0)

    @property
    def theta(self) -> dict:
        return {"weights": self.weights.tolist(), "coefs": self.coefs.tolist(),
                "sigmas": self.sigmas.tolist()}

    def to_dict(self) -> dict:
        return {"family": self.family, **self.theta, "basis": self.basis.to_list()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["coefs"], d["sigmas"], Basis.from_list(d["basis"]))


def _kmeans_labels(P, k, rng, iters=20):
    centers = [P[rng.integers(P.shape[0])]]
    for _ in range(1, k):
        d2 = np.min([np.sum((P - c) ** 2, axis=1) for c in centers], axis=0)
        centers.append(P[rng.choice(P.shape[0], p=d2 / d2.sum())])
    C = np.array(centers)
    lab = np.zeros(P.shape[0], dtype=int)
    for _ in range(iters):
        lab = np.argmin(((P[:, None, :] - C[None]) ** 2).sum(-1), axis=1)
        for j in range(k):
            if np.any(lab == j):
                C[j] = P[lab == j].mean(0)
    return lab


def _m_step(Z, y, resp, shared):
    n, K = resp.shape
    coefs = np.empty((K, Z.shape[1]))
    sq = np.empty(K)
    for k in range(K):
        r = resp[:, k]
        ZW = Z * r[:, None]
        coefs[k] = np.linalg.solve(ZW.T @ Z + 1e-10 * np.eye(Z.shape[1]), ZW.T @ y)
        sq[k] = np.sum(r * (y - Z @ coefs[k]) ** 2)
    nk = resp.sum(0)
    if shared:
        var = np.full(K, sq.sum() / n)
    else:
        var = sq / np.maximum(nk, 1e-300)
    return nk / n, coefs, var


def _e_step(Z, y, weights, coefs, var):
    M = Z @ coefs.T
    logp = (np.log(weights)[None, :] - 0.5 * np.log(2 * np.pi * var)[None, :]
            - 0.5 * (y[:, None] - M) ** 2 / var[None, :])
    norm = logsumexp(logp, axis=1)
    return np.exp(logp - norm[:, None]), float(norm.sum())


def _em_run(Z, y, resp, shared, max_iter, tol, check):
    trace = []
    ll_prev = -np.inf
    for it in range(1, max_iter + 1):
        w, coefs, var = _m_step(Z, y, resp, shared)
        if np.any(var < 1e-10) or np.any(w < 1e-8):
            return None
        resp, ll = _e_step(Z, y, w, coefs, var)
        if check and ll < ll_prev - 1e-8 * max(1.0, abs(ll_prev)):
            raise EMMonotonicityError(f"log-likelihood decreased at iteration {it}: {ll_prev} -> {ll}")
        trace.append(ll)
        if ll - ll_prev < tol:
            return w, coefs, var, ll, it, True, trace
        ll_prev = ll
    return w, coefs, var, ll, max_iter, False, trace


def fit_mixture_lm(train: Dataset, components: int = 2, restarts: int = 20, seed: int = 0,
                   basis: Basis | None = None, shared_variance: bool = True,
                   max_iter: int = 500, tol: float = 1e-8, check_monotone: bool = True):
    """EM for a mixture of linear regressions; best of ``restarts`` by log-likelihood.

    Every restart starts from a k-means partition of the standardised
    (features, y) cloud with its own seeded k-means++ draw. Restarts whose
    variance or mixing weight collapses are discarded; if all collapse the
    returned report has ``converged=False``.
    """
    if components < 2:
        raise ValueError("components must be >= 2")
    basis = basis if basis is not None else Basis.linear(train.dim)
    Z = basis.design(train.X)
    check_rank(Z, basis.names)
    y = train.y
    P = np.column_stack([Z[:, 1:], y])
    P = (P - P.mean(0)) / np.where(P.std(0) > 0, P.std(0), 1.0)
    rng = np.random.default_rng(seed)
    best = None
    degenerate = 0
    for r in range(restarts):
        lab = _kmeans_labels(P, components, rng)
        resp = np.full((train.n, components), 0.05 / (components - 1))
        resp[np.arange(train.n), lab] = 0.95
        out = _em_run(Z, y, resp, shared_variance, max_iter, tol, check_monotone)
        if out is None:
            degenerate += 1
            continue
        if best is None or out[3] > best[3]:
            best = out
    if best is None:
        # fall back to a single-regression fit duplicated across components
        coef = np.linalg.lstsq(Z, y, rcond=None)[0]
        var = np.mean((y - Z @ coef) ** 2)
        w = np.full(components, 1.0 / components)
        model = MixtureRegressionModel(w, np.tile(coef, (components, 1)), np.sqrt(var), basis)
        return model, FitReport("mixture-lm", model.theta, float("nan"), 0, False,
                                flags={"degenerate_restarts": degenerate})
    w, coefs, var, ll, it, conv, trace = best
    order = np.argsort(-w)
    model = MixtureRegressionModel(w[order], coefs[order], np.sqrt(var[order]), basis)
    return model, FitReport("mixture-lm", model.theta, ll, it, conv, trace,
                            {"degenerate_restarts": degenerate})
