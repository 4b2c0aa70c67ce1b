"""Power maximisation over the working-model parameters.

The working model's parameter is treated as free: for each candidate
theta the critical odds eta(theta) are profiled out exactly by the engine,
and the resulting calibration power (a step function of theta) is
maximised by a multi-start Nelder-Mead search over a box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .core import Dataset
from .engine import NO_CANDIDATE, calib_ratios, critical_ratio, error_at, normalize_weights, power_at
from .models.base import SIGMA_FLOOR, Basis, GaussianLocationModel, LinearGaussianModel


@dataclass
class ParamFamily:
    """Maps a parameter vector to a working model."""

    name: str
    build: Callable[[np.ndarray], object]
    dim: int


def linear_gaussian_family(basis: Basis, intercept: float, sigma: float) -> ParamFamily:
    """Gaussian linear model with free slopes.

    The intercept and sigma stay at their plug-in values: for a fixed
    threshold the selection region only depends on the slopes.
    """
    def build(theta):
        return LinearGaussianModel(np.concatenate([[intercept], theta]), sigma, basis)

    return ParamFamily("linear-gaussian", build, len(basis.terms))


@dataclass
class ParamSearchSpace:
    family: ParamFamily
    lower: np.ndarray
    upper: np.ndarray
    init: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.init = np.atleast_2d(np.asarray(self.init, dtype=float))
        if not (self.lower.size == self.upper.size == self.dim == self.init.shape[1]):
            raise ValueError("box, init and family dimensions disagree")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("search box must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.init < self.lower) or np.any(self.init > self.upper):
            raise ValueError("initial point outside the search box")

    @property
    def dim(self) -> int:
        return self.family.dim

    @classmethod
    def around(cls, family: ParamFamily, theta0, width: float = 2.0) -> "ParamSearchSpace":
        """Box theta0 +/- width * (|theta0| + mean|theta0|)."""
        t = np.asarray(theta0, dtype=float)
        s = width * (np.abs(t) + np.abs(t).mean() + 1e-8)
        return cls(family, t - s, t + s, t)


@dataclass
class PowerMaxResult:
    theta_hat: np.ndarray
    eta_hat: float
    achieved_power: float
    achieved_error: float
    trace: list = field(default_factory=list)

    def model(self, family: ParamFamily):
        return family.build(self.theta_hat)


class _Objective:
    """Profiled power at theta with exact error bookkeeping."""

    def __init__(self, calib: Dataset, c, target, family, weights, delta):
        self.X, self.null = calib.X, calib.y <= c
        self.c, self.target, self.family, self.delta = c, target, family, delta
        self.w = normalize_weights(weights, calib.n)

    def ratios(self, theta):
        return calib_ratios(self.family.build(theta), self.X, [self.c])[:, 0]

    def profile(self, theta):
        r = self.ratios(theta)
        eta = critical_ratio(r, self.null, self.w, self.delta, self.target)
        if eta == NO_CANDIDATE:
            return eta, 0.0, 0.0
        return eta, float(power_at(r, self.null, self.w, eta)), float(error_at(r, self.null, self.w, eta, self.delta))

    def at(self, theta, eta):
        r = self.ratios(theta)
        return float(power_at(r, self.null, self.w, eta)), float(error_at(r, self.null, self.w, eta, self.delta))


def profile_eta(theta, calib: Dataset, c: float, target: float, family: ParamFamily,
                weights=None, delta: float = 0.0) -> float:
    """Largest admissible critical odds under the model at ``theta``, or -1."""
    return _Objective(calib, c, target, family, weights, delta).profile(np.asarray(theta, float))[0]


def _better(a, b) -> bool:
    """Order (power, error, theta): more power, then less error, then lexicographically smaller theta."""
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    return tuple(a[2]) < tuple(b[2])


def maximize_power(calib: Dataset, c: float, target: float, space: ParamSearchSpace, weights=None,
                   delta: float = 0.0, starts: int = 10, seed: int = 0, maxfev: int = 200,
                   joint: bool = False) -> PowerMaxResult:
    """Maximise calibration power over the box subject to the error constraint.

    Two-step by default: eta is profiled at each theta. With ``joint=True``
    the search runs over (theta, log eta) with infeasible points penalised,
    and eta is taken as searched rather than profiled. Starting points are
    the supplied ``space.init`` rows plus scrambled Sobol points; the best
    evaluation seen anywhere is returned, so the result never loses to its
    starting points.
    """
    if not calib.has_outcomes:
        raise ValueError("calibration outcomes are required")
    null = calib.y <= c
    if null.all() or not null.any():
        raise ValueError("calibration set needs units on both sides of the threshold")
    obj = _Objective(calib, c, target, space.family, weights, delta)
    lo, hi = space.lower, space.upper
    width = hi - lo
    best = None
    trace: list[float] = []

    def consider(theta, eta, power, err):
        nonlocal best
        cand = (power, err, theta.copy(), eta)
        if eta != NO_CANDIDATE and _better(cand, best):
            best = cand

    def f_two_step(z):
        theta = np.clip(z, lo, hi)
        eta, power, err = obj.profile(theta)
        consider(theta, eta, power, err)
        trace.append(power)
        return -power

    def f_joint(z):
        theta = np.clip(z[:-1], lo, hi)
        eta = float(np.exp(z[-1]))
        power, err = obj.at(theta, eta)
        if err <= target:
            consider(theta, eta, power, err)
            trace.append(power)
            return -power
        trace.append(0.0)
        return err - target

    inits = list(space.init)
    n_extra = max(starts - len(inits), 0)
    if n_extra and np.any(width > 0):
        sob = qmc.Sobol(space.dim, scramble=True, seed=seed).random_base2(int(np.ceil(np.log2(n_extra))))[:n_extra]
        inits += list(lo + sob * width)

    for x0 in inits:
        if joint:
            eta0, _, _ = obj.profile(x0)
            z0 = np.append(x0, np.log(eta0) if eta0 > 0 else 0.0)
            f_joint(z0)
            step = np.append(0.1 * width, 0.5)
            fun = f_joint
        else:
            z0 = x0
            step = 0.1 * width
            f_two_step(z0)
            fun = f_two_step
        if not np.any(step > 0):
            continue
        simplex = np.vstack([z0] + [z0 + np.eye(z0.size)[k] * step[k] for k in range(z0.size)])
        minimize(fun, z0, method="Nelder-Mead",
                 options={"initial_simplex": simplex, "maxfev": maxfev, "xatol": 1e-6, "fatol": 0.0})

    if best is None:
        return PowerMaxResult(space.init[0].copy(), NO_CANDIDATE, 0.0, 0.0, trace)
    power, err, theta, eta = best
    return PowerMaxResult(theta, eta, power, err, trace)


def plugin_space(model: LinearGaussianModel, width: float = 2.0) -> ParamSearchSpace:
    """Search space centred on a fitted linear-Gaussian model's slopes."""
    fam = linear_gaussian_family(model.basis, model.coef[0], model.sigma)
    return ParamSearchSpace.around(fam, model.coef[1:], width)


# ---------------------------------------------------------------------------
# ensemble weights


def _simplex_grid(k: int, steps: int) -> np.ndarray:
    if k == 1:
        return np.array([[1.0]])
    out = []

    def rec(prefix, left, depth):
        if depth == k - 1:
            out.append(prefix + [left])
            return
        for i in range(left + 1):
            rec(prefix + [i], left - i, depth + 1)

    rec([], steps, 0)
    return np.array(out, dtype=float) / steps


def _blend_power(omega, means, calib, c, target, delta, weights):
    mu = means @ omega
    sigma = max(float(np.sqrt(np.mean((calib.y - mu) ** 2))), SIGMA_FLOOR)
    w = normalize_weights(weights, calib.n)
    null = calib.y <= c
    model = GaussianLocationModel(lambda X, _mu=mu: _mu, sigma)
    r = calib_ratios(model, calib.X, [c])[:, 0]
    eta = critical_ratio(r, null, w, delta, target)
    return 0.0 if eta == NO_CANDIDATE else float(power_at(r, null, w, eta))


def fit_ensemble_weights(models: Sequence, calib: Dataset, c: float, target: float,
                         delta: float = 0.0, weights=None, grid_steps: int = 10,
                         refine_steps: int = 4) -> np.ndarray:
    """Simplex weights for a blended mean maximising calibration power.

    Each model needs a ``mean(X)`` method. The blend is scored as a
    Gaussian location model with sigma taken from the blend's calibration
    residuals. A coarse simplex grid is refined by repeatedly halving the
    grid spacing around the incumbent. Ties go to the weights closest to
    uniform.
    """
    k = len(models)
    if k == 0:
        raise ValueError("need at least one model")
    if k == 1:
        return np.array([1.0])
    means = np.column_stack([np.asarray(m.mean(calib.X), dtype=float) for m in models])
    uniform = np.full(k, 1.0 / k)

    def key(om):
        return (_blend_power(om, means, calib, c, target, delta, weights), -np.sum((om - uniform) ** 2))

    cands = _simplex_grid(k, grid_steps)
    if grid_steps % k:
        cands = np.vstack([cands, uniform])
    scores = [key(om) for om in cands]
    best = cands[max(range(len(cands)), key=lambda i: scores[i])]
    best_key = key(best)
    h = 1.0 / grid_steps
    for _ in range(refine_steps):
        h /= 2
        for i in range(k):
            for j in range(k):
                if i == j:
                    continue
                om = best.copy()
                move = min(h, om[j])
                om[i] += move
                om[j] -= move
                sk = key(om)
                if sk > best_key:
                    best, best_key = om, sk
    return best
