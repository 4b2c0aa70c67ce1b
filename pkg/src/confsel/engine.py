"""Likelihood-ratio conformal selection.

A working model supplies the conditional CDF F(y | x). Units are ranked by
the odds R(x; c) = F(c | x) / (1 - F(c | x)); small odds favour Y > c.
The critical value is the largest calibration odds whose (optionally
weighted, optionally delta-inflated) empirical error stays below the target.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .core import Dataset, SelectionReport, SelectionTask, ThresholdSpec

NO_CANDIDATE = -1.0
ALPHA_CAP = 1.0 - 1e-9


class ModelContractError(RuntimeError):
    """A working model returned CDF values outside [0, 1] (or NaN)."""


class WorkingModel(Protocol):
    """Anything with a vectorised conditional CDF.

    ``cdf(y, X)`` broadcasts ``y`` against the rows of ``X``: a scalar or an
    ``(n,)`` array gives an ``(n,)`` result, an ``(n, k)`` or ``(1, k)`` array
    gives an ``(n, k)`` result.
    """

    def cdf(self, y, X) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class CriticalValueSet:
    candidates: np.ndarray  # one odds value per calibration unit
    admissible: np.ndarray  # distinct admissible candidates, ascending
    errors: np.ndarray      # error at each distinct candidate, ascending order
    levels: np.ndarray      # distinct candidates, ascending


def _checked(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if np.any(np.isnan(F)) or np.any(F < 0) or np.any(F > 1):
        raise ModelContractError("working model returned CDF values outside [0, 1]")
    return F


def odds(F) -> np.ndarray:
    """F / (1 - F) with +inf where F == 1."""
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(F >= 1.0, np.inf, F / (1.0 - F))


def calib_ratios(model: WorkingModel, X, cs) -> np.ndarray:
    """Odds matrix of shape ``(n, len(cs))``, column k at threshold ``cs[k]``."""
    cs = np.atleast_1d(np.asarray(cs, dtype=float))
    F = _checked(model.cdf(cs[None, :], np.atleast_2d(X)))
    return odds(F.reshape(np.atleast_2d(X).shape[0], cs.size))


def likelihood_ratio(model: WorkingModel, x, c):
    """R(x; c) for one covariate vector (returns float) or a matrix of rows."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        c = np.full(X.shape[0], float(c))
    r = odds(_checked(model.cdf(c, X)))
    return float(r[0]) if single else r


def normalize_weights(weights, n: int) -> np.ndarray:
    """Unit weights when absent, else rescaled to mean one."""
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != n:
        raise ValueError(f"{w.size} weights for {n} calibration units")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and strictly positive")
    return w / w.mean()


# ---------------------------------------------------------------------------
# array-level primitives; ``ratios`` are calibration odds at a fixed threshold,
# ``null`` flags Y_i <= c.


def error_at(ratios, null, w, eta, delta=0.0) -> float:
    inside = ratios <= eta
    return (delta + np.sum(w[inside & null])) / max(1.0, np.sum(w[inside]))


def power_at(ratios, null, w, eta) -> float:
    inside = ratios <= eta
    return np.sum(w[inside & ~null]) / max(1.0, np.sum(w[~null]))


def alt_power_at(ratios, null, w, eta) -> float:
    """Share of nulls among units with odds >= eta.

    The alternative objective mentioned alongside the main procedure; it is
    only used when passed explicitly as ``objective``.
    """
    outside = ratios >= eta
    return np.sum(w[outside & null]) / max(1.0, np.sum(w[outside]))


def critical_set(ratios, null, w, delta, target) -> CriticalValueSet:
    ratios = np.asarray(ratios, dtype=float)
    order = np.argsort(ratios, kind="stable")
    r = ratios[order]
    cw = np.cumsum(w[order])
    cn = np.cumsum((w * null)[order])
    last = np.flatnonzero(np.append(r[1:] != r[:-1], True))
    levels = r[last]
    errors = (delta + cn[last]) / np.maximum(1.0, cw[last])
    return CriticalValueSet(ratios, levels[errors <= target], errors, levels)


def critical_ratio(ratios, null, w, delta, target, objective=None) -> float:
    """Optimal critical odds or ``NO_CANDIDATE``.

    Without ``objective`` this is the largest admissible candidate, which
    maximises the power because the power is nondecreasing in eta. With an
    objective callable ``(ratios, null, w, eta) -> float`` the admissible
    candidate with the highest objective wins, ties going to the larger eta.
    """
    cvs = critical_set(ratios, null, w, delta, target)
    if cvs.admissible.size == 0:
        return NO_CANDIDATE
    if objective is None:
        return float(cvs.admissible[-1])
    vals = np.array([objective(ratios, null, w, e) for e in cvs.admissible])
    best = np.flatnonzero(vals == vals.max())[-1]
    return float(cvs.admissible[best])


# ---------------------------------------------------------------------------
# dataset-level API


def _calib_parts(calib: Dataset, model, c, weights):
    if not calib.has_outcomes:
        raise ValueError("calibration outcomes are required")
    ratios = calib_ratios(model, calib.X, [c])[:, 0]
    null = calib.y <= c
    return ratios, null, normalize_weights(weights, calib.n)


def error_fn(calib: Dataset, model: WorkingModel, c: float, eta: float,
             delta: float = 0.0, weights=None) -> float:
    """Empirical (weighted) false-discovery error of the region {R <= eta}."""
    ratios, null, w = _calib_parts(calib, model, c, weights)
    return float(error_at(ratios, null, w, eta, delta))


def power_fn(calib: Dataset, model: WorkingModel, c: float, eta: float, weights=None) -> float:
    """Empirical (weighted) share of calibration exceedances inside {R <= eta}."""
    ratios, null, w = _calib_parts(calib, model, c, weights)
    return float(power_at(ratios, null, w, eta))


def critical_values(calib: Dataset, model: WorkingModel, c: float, target: float,
                    delta: float = 0.0, weights=None) -> CriticalValueSet:
    ratios, null, w = _calib_parts(calib, model, c, weights)
    return critical_set(ratios, null, w, delta, target)


def optimal_eta(calib: Dataset, model: WorkingModel, c: float, target: float,
                delta: float = 0.0, weights=None, objective=None) -> float:
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    ratios, null, w = _calib_parts(calib, model, c, weights)
    return critical_ratio(ratios, null, w, delta, target, objective)


def _per_unit_etas(task: SelectionTask, model, cs, target, objective=None):
    """Critical odds for each distinct threshold; returns (etas, calib odds)."""
    calib = task.calibration
    w = normalize_weights(task.weights, calib.n)
    uniq, inv = np.unique(cs, return_inverse=True)
    R = calib_ratios(model, calib.X, uniq)
    eta_u = np.empty(uniq.size)
    for k, c in enumerate(uniq):
        eta_u[k] = critical_ratio(R[:, k], calib.y <= c, w, task.delta, target, objective)
    return eta_u[inv], R[:, inv], w


def _select(task: SelectionTask, model, cs, tag, adjust, objective):
    test_r = odds(_checked(model.cdf(cs, task.test.X)))
    etas, R, w = _per_unit_etas(task, model, cs, task.target_fdr, objective)
    alpha = None
    diag = {}
    if adjust:
        bhat = _bhat(R, etas, w)
        diag["bhat_mean"] = float(bhat.mean())
        if np.all(bhat == 0):
            diag["adjustment_undefined"] = True
            alpha = task.target_fdr
        else:
            alpha = _adjust(task.target_fdr, bhat)
            etas, R, w = _per_unit_etas(task, model, cs, alpha, objective)
    sel = np.flatnonzero(test_r <= etas)
    diag["n_without_candidate"] = int(np.sum(etas == NO_CANDIDATE))
    return SelectionReport(sel, etas, test_r, tag, alpha, diag)


def select_constant(task: SelectionTask, model: WorkingModel, *, tag: str = "np",
                    adjust: bool = False, objective=None) -> SelectionReport:
    """Selection with one threshold shared by every test unit."""
    if not task.thresholds.is_constant:
        raise ValueError("select_constant needs a constant threshold; use select_varying")
    cs = task.threshold_vector()
    return _select(task, model, cs, tag, adjust, objective)


def select_varying(task: SelectionTask, model: WorkingModel, *, tag: str = "np",
                   adjust: bool = False, objective=None) -> SelectionReport:
    """Unit-specific critical values; honours ``task.weights``.

    A constant threshold is broadcast to every test unit.
    """
    cs = task.threshold_vector()
    return _select(task, model, cs, tag, adjust, objective)


def select(task: SelectionTask, model: WorkingModel, **kw) -> SelectionReport:
    if task.thresholds.is_constant:
        return select_constant(task, model, **kw)
    return select_varying(task, model, **kw)


# ---------------------------------------------------------------------------
# adjusted level


def _bhat(R, etas, w) -> np.ndarray:
    # R is (n, m): column j holds calibration odds at c_j
    inside = R <= etas[None, :]
    return (w[:, None] * inside).sum(axis=0) / w.sum()


def _adjust(target, bhat) -> float:
    miss = np.prod(1.0 - bhat)
    return float(min(target / (1.0 - miss), ALPHA_CAP))


def adjusted_alpha(calib: Dataset, model: WorkingModel, thresholds: ThresholdSpec,
                   etas, target: float, weights=None) -> float:
    """Inflated level target / (1 - prod_j (1 - b_j)).

    ``b_j`` is the (weighted) share of calibration units inside the region
    selected for test unit j. If every ``b_j`` is zero the adjustment is
    undefined; a warning is issued and ``target`` returned.
    """
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    cs = thresholds.expand(etas.size)
    R = calib_ratios(model, calib.X, cs)
    bhat = _bhat(R, etas, normalize_weights(weights, calib.n))
    if np.all(bhat == 0):
        warnings.warn("all b_j are zero; adjusted level undefined, returning target",
                      RuntimeWarning, stacklevel=2)
        return float(target)
    return _adjust(target, bhat)


__all__ = [
    "NO_CANDIDATE", "ModelContractError", "WorkingModel", "CriticalValueSet",
    "odds", "likelihood_ratio", "normalize_weights", "error_fn", "power_fn",
    "critical_values", "optimal_eta", "select_constant", "select_varying", "select",
    "adjusted_alpha", "error_at", "power_at", "alt_power_at", "critical_ratio",
    "critical_set", "calib_ratios",
]
