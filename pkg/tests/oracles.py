"""Independent reference implementations used by the tests.

Everything here is written as plain loops over units, without sharing code
with the package, so agreement is meaningful.
"""

from fractions import Fraction

import numpy as np
from scipy.special import ndtr


class TableModel:
    """F(y | x) = x[0] for every y: the first covariate is the CDF value.

    Lets a test fix the likelihood ratios directly.
    """

    def cdf(self, y, X):
        X = np.atleast_2d(X)
        y = np.asarray(y, dtype=float)
        F = X[:, 0]
        if y.ndim == 2:
            return np.broadcast_to(F[:, None], (X.shape[0], y.shape[1])).copy()
        return F.copy()


def f_from_ratio(r):
    r = np.asarray(r, dtype=float)
    return r / (1 + r)


class ShiftModel:
    """Gaussian location model F(y | x) = Phi((y - x[0]) / sigma)."""

    def __init__(self, sigma=1.0):
        self.sigma = sigma

    def mean(self, X):
        return np.atleast_2d(X)[:, 0]

    def cdf(self, y, X):
        mu = np.atleast_2d(X)[:, 0]
        y = np.asarray(y, dtype=float)
        if y.ndim == 2:
            return ndtr((y - mu[:, None]) / self.sigma)
        return ndtr((y - mu) / self.sigma)


def _dec(v):
    # user-facing levels such as 0.3 mean the decimal, not its binary float
    return Fraction(repr(float(v)))


def brute_error(ratios, null, w, eta, delta=0.0):
    num = _dec(delta)
    den = Fraction(0)
    for r, nl, wi in zip(ratios, null, w):
        if r <= eta:
            den += Fraction(wi)
            if nl:
                num += Fraction(wi)
    return num / max(Fraction(1), den)


def brute_power(ratios, null, w, eta):
    num = Fraction(0)
    den = Fraction(0)
    for r, nl, wi in zip(ratios, null, w):
        if not nl:
            den += Fraction(wi)
            if r <= eta:
                num += Fraction(wi)
    return num / max(Fraction(1), den)


def brute_eta(ratios, null, w, target, delta=0.0):
    """Arg-max of power over admissible candidates, ties to the larger eta."""
    best = None
    for eta in sorted(set(float(r) for r in ratios)):
        if brute_error(ratios, null, w, eta, delta) <= _dec(target):
            p = brute_power(ratios, null, w, eta)
            if best is None or p >= best[0]:
                best = (p, eta)
    return -1.0 if best is None else best[1]


def mu_threshold_selection(mu_cal, y_cal, mu_test, c, target, delta):
    """Location-model selection done entirely on the mean scale."""
    null = [y <= c for y in y_cal]
    best_t = None
    for t in sorted(set(mu_cal), reverse=True):
        inside = [m >= t for m in mu_cal]
        num = delta + sum(1 for a, b in zip(inside, null) if a and b)
        den = max(1, sum(inside))
        if num / den <= target:
            best_t = t  # descending sweep: the last admissible t is the smallest
    if best_t is None:
        return np.array([], dtype=int)
    return np.array([j for j, m in enumerate(mu_test) if m >= best_t], dtype=int)


def brute_bh(p, q):
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    k = 0
    for rank, i in enumerate(order, start=1):
        if p[i] <= q * rank / m:
            k = rank
    return sorted(order[:k])


def brute_conformal_pvalue(V, t, u):
    less = sum(1 for v in V if v < t)
    eq = sum(1 for v in V if v == t)
    return (less + (1 + eq) * u) / (len(V) + 1)
