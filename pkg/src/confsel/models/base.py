"""Feature maps, fit reports and the Gaussian location working model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

SIGMA_FLOOR = 1e-8


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class Basis:
    """Monomial feature map with an implicit intercept.

    Each term is a tuple of ``(column, power)`` pairs, e.g. ``((0, 2),)`` is
    x1 squared and ``((0, 1), (1, 1))`` is x1 * x2.
    """

    terms: tuple

    @classmethod
    def linear(cls, dim: int) -> "Basis":
        return cls(tuple(((k, 1),) for k in range(dim)))

    @classmethod
    def columns(cls, cols: Sequence[int]) -> "Basis":
        return cls(tuple(((int(k), 1),) for k in cols))

    @classmethod
    def polynomial(cls, dim: int, degree: int) -> "Basis":
        """Pure powers of each column up to ``degree`` (no interactions)."""
        return cls(tuple(((k, p),) for p in range(1, degree + 1) for k in range(dim)))

    def plus(self, *terms) -> "Basis":
        return Basis(self.terms + tuple(tuple(tuple(f) for f in t) for t in terms))

    @property
    def names(self) -> list[str]:
        out = ["1"]
        for t in self.terms:
            out.append("*".join(f"x{k + 1}" + (f"^{p}" if p != 1 else "") for k, p in t))
        return out

    def design(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cols = [np.ones(X.shape[0])]
        for t in self.terms:
            v = np.ones(X.shape[0])
            for k, p in t:
                v = v * X[:, k] ** p
            cols.append(v)
        return np.column_stack(cols)

    def to_list(self):
        return [[list(f) for f in t] for t in self.terms]

    @classmethod
    def from_list(cls, lst) -> "Basis":
        return cls(tuple(tuple(tuple(f) for f in t) for t in lst))


@dataclass
class FitReport:
    family: str
    theta: dict
    loglik_or_loss: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)


def check_rank(Z, names) -> None:
    """Raise :class:`RankDeficientError` naming columns that are collinear."""
    from scipy.linalg import qr

    _, R, piv = qr(Z, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(Z.shape) * np.finfo(float).eps * (d[0] if d.size else 0.0)
    rank = int(np.sum(d > tol))
    if rank < Z.shape[1]:
        bad = [names[i] for i in piv[rank:]]
        raise RankDeficientError(f"design matrix is rank deficient; collinear columns: {bad}")


def _rows(y, loc):
    """Broadcast per-row parameter ``loc`` against ``y`` (see WorkingModel)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 2:
        return y, loc[:, None]
    return y, loc


class GaussianLocationModel:
    """Y = mu(x) + N(0, sigma^2), where ``mean_fn`` maps X to mu(X)."""

    family = "gaussian"

    def __init__(self, mean_fn: Callable, sigma: float):
        self.mean_fn = mean_fn
        self.sigma = max(float(sigma), SIGMA_FLOOR)

    def mean(self, X) -> np.ndarray:
        return np.asarray(self.mean_fn(np.atleast_2d(X)), dtype=float)

    def cdf(self, y, X):
        y, mu = _rows(y, self.mean(X))
        return ndtr((y - mu) / self.sigma)

    @property
    def theta(self) -> dict:
        return {"sigma": self.sigma}


class LinearGaussianModel(GaussianLocationModel):
    family = "linear-gaussian"

    def __init__(self, coef, sigma: float, basis: Basis):
        self.coef = np.asarray(coef, dtype=float)
        self.basis = basis
        super().__init__(lambda X: basis.design(X) @ self.coef, sigma)

    @property
    def theta(self) -> dict:
        return {"coef": self.coef.tolist(), "sigma": self.sigma}

    def to_dict(self) -> dict:
        return {"family": self.family, "coef": self.coef.tolist(), "sigma": self.sigma,
                "basis": self.basis.to_list()}

    @classmethod
    def from_dict(cls, d) -> "LinearGaussianModel":
        return cls(d["coef"], d["sigma"], Basis.from_list(d["basis"]))


class WeightModel:
    """Covariate-shift weight w(x) = odds(x) * normalizer, strictly positive.

    ``log_odds`` maps X to log P(test | x) / P(calibration | x).
    """

    def __init__(self, log_odds: Callable, normalizer: float, clip: float = 30.0):
        self.log_odds = log_odds
        self.normalizer = float(normalizer)
        self.clip = clip

    def weight(self, X) -> np.ndarray:
        lo = np.clip(np.asarray(self.log_odds(np.atleast_2d(X)), dtype=float), -self.clip, self.clip)
        return np.exp(lo) * self.normalizer

    __call__ = weight
