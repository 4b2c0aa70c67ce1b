"""Conformal p-value selection: nonconformity scores, p-values, BH.

These are the comparison methods. A score V(x, y) must be nondecreasing in
y; the test statistic plugs the threshold in place of the unseen outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import SelectionReport, SelectionTask

NO_CANDIDATE = -1.0


class ScoreContractError(ValueError):
    pass


@dataclass(eq=False)
class ScoreFunction:
    """Nonconformity score V(x, y; c).

    ``fn(X, y, c)`` is vectorised over rows; ``c`` only matters for the
    clipped score. ``params`` records constants such as the clipping ``M``.
    """

    kind: str
    fn: Callable
    params: dict = field(default_factory=dict)

    def __call__(self, X, y, c=None):
        return np.asarray(self.fn(np.atleast_2d(X), np.asarray(y, dtype=float), c), dtype=float)

    def check_monotone(self, X_probe, y_grid, c) -> None:
        y_grid = np.sort(np.asarray(y_grid, dtype=float))
        for x in np.atleast_2d(X_probe):
            v = self(np.repeat(x[None, :], y_grid.size, 0), y_grid, c)
            if np.any(np.diff(v) < -1e-12):
                raise ScoreContractError(f"score {self.kind!r} is not nondecreasing in y")


def residual_score(mean_fn) -> ScoreFunction:
    return ScoreFunction("res", lambda X, y, c: y - mean_fn(X))


def clipped_score(mean_fn, M: float | None = None) -> ScoreFunction:
    """M * 1{y > c} + c * 1{y <= c} - mu(x).

    With ``M=None`` the constant is set by :func:`jc_select` from the pooled
    covariates as 2 max|mu| + max|c| + 1, which puts every exceedance above
    every non-exceedance.
    """
    s = ScoreFunction("clip", None, {"M": M, "mean_fn": mean_fn})

    def fn(X, y, c):
        M_ = s.params["M"]
        if M_ is None:
            raise ScoreContractError("clipping constant M is unset")
        return np.where(y > c, M_, c) - mean_fn(X)

    s.fn = fn
    return s


def cdf_score(model) -> ScoreFunction:
    return ScoreFunction("cdf", lambda X, y, c: model.cdf(y, X))


def cqr_score(qmodel, level: float) -> ScoreFunction:
    return ScoreFunction(f"cqr{int(round(level * 100))}",
                         lambda X, y, c: y - qmodel.predict_quantiles(X, [level])[:, 0])


def _set_clip_constant(score: ScoreFunction, X_pool, cs):
    if score.kind == "clip" and score.params.get("M") is None:
        mu = np.asarray(score.params["mean_fn"](X_pool), dtype=float)
        score.params["M"] = float(2 * np.max(np.abs(mu)) + np.max(np.abs(cs)) + 1.0)


# ---------------------------------------------------------------------------
# p-values


def conformal_pvalue(calib_scores, test_score, u) -> float:
    V = np.asarray(calib_scores, dtype=float)
    less = np.sum(V < test_score)
    ties = np.sum(V == test_score)
    return float((less + (1 + ties) * u) / (V.size + 1))


def weighted_conformal_pvalue(calib_scores, calib_weights, test_score, test_weight, u) -> float:
    V = np.asarray(calib_scores, dtype=float)
    w = np.asarray(calib_weights, dtype=float)
    less = np.sum(w[V < test_score])
    ties = np.sum(w[V == test_score])
    return float((less + (test_weight + ties) * u) / (w.sum() + test_weight))


def conformal_pvalues(calib_scores, test_scores, u) -> np.ndarray:
    """Vectorised :func:`conformal_pvalue` over test units."""
    V = np.sort(np.asarray(calib_scores, dtype=float))
    t = np.asarray(test_scores, dtype=float)
    less = np.searchsorted(V, t, side="left")
    ties = np.searchsorted(V, t, side="right") - less
    return (less + (1 + ties) * np.asarray(u)) / (V.size + 1)


# ---------------------------------------------------------------------------
# multiple testing


def bh_count(pvalues, target) -> int:
    p = np.sort(np.asarray(pvalues, dtype=float))
    m = p.size
    if m == 0:
        return 0
    ok = np.flatnonzero(p <= target * np.arange(1, m + 1) / m)
    return int(ok[-1] + 1) if ok.size else 0


def bh_procedure(pvalues, target) -> np.ndarray:
    """Benjamini-Hochberg step-up; returns sorted rejected indices."""
    p = np.asarray(pvalues, dtype=float)
    k = bh_count(p, target)
    if k == 0:
        return np.array([], dtype=int)
    return np.flatnonzero(p <= target * k / p.size)


def weighted_pruned_selection(calib_scores, calib_w, test_scores, test_w, target, xi, imputed=None):
    """Weighted conformal selection with heterogeneous pruning.

    Step 1 computes deterministic weighted p-values p_j. For every j the other
    test p-values are recomputed with unit j's imputed score treated as an
    extra calibration point (p_j itself set to 0), BH on that vector gives a
    rejection count R_j, and j is a first-step candidate when
    p_j <= target * R_j / m. Candidates survive pruning when
    xi_j * R_j <= r*, with r* the largest r such that at least r candidates
    have xi_j * R_j <= r.

    ``calib_scores`` is ``(n,)`` or ``(n, m)`` when calibration scores depend
    on each test unit's threshold; then ``imputed[j, l]`` is unit j's imputed
    score under unit l's threshold (defaults to ``test_scores[j]``).

    Returns ``(selected, pvalues, cutoffs)`` where ``cutoffs[j]`` is
    target * R_j / m for survivors and -1 otherwise.
    """
    T = np.asarray(test_scores, dtype=float)
    m = T.size
    V = np.asarray(calib_scores, dtype=float)
    if V.ndim == 1:
        V = np.broadcast_to(V[:, None], (V.size, m))
    w = np.asarray(calib_w, dtype=float)
    tw = np.asarray(test_w, dtype=float)
    S = np.broadcast_to(T[:, None], (m, m)) if imputed is None else np.asarray(imputed, dtype=float)
    below = np.array([np.sum(w[V[:, l] < T[l]]) for l in range(m)])
    W = w.sum()
    p = (below + tw) / (W + tw)

    R = np.empty(m, dtype=int)
    for j in range(m):
        pj = (below + tw[j] * (S[j] < T)) / (W + tw[j])
        pj[j] = 0.0
        R[j] = bh_count(pj, target)
    first = np.flatnonzero(p <= target * R / m)
    cut = np.full(m, NO_CANDIDATE)
    if first.size == 0:
        return first, p, cut
    score = xi[first] * R[first]
    r_star = 0
    for r in range(first.size, 0, -1):
        if np.sum(score <= r) >= r:
            r_star = r
            break
    keep = first[score <= r_star]
    cut[keep] = target * R[keep] / m
    return keep, p, cut


# ---------------------------------------------------------------------------


def _score_matrix(score, X, y, cs):
    """Calibration scores per distinct threshold; shape (n, len(cs))."""
    return np.column_stack([score(X, y, c) for c in cs])


def jc_select(task: SelectionTask, score: ScoreFunction, weighted: bool = False, *,
              uniforms=None, prune_uniforms=None, tag: str | None = None) -> SelectionReport:
    """Conformal p-values followed by BH, or weighted selection with pruning.

    ``uniforms`` are the tie-breaking draws U_j and ``prune_uniforms`` the
    pruning draws; both default to draws from ``task.seed``. For clipped
    scores with varying thresholds, calibration scores are recomputed at
    each test unit's own threshold.
    """
    calib, test = task.calibration, task.test
    cs = task.threshold_vector()
    m = task.m
    rng = np.random.default_rng(task.seed)
    U = rng.uniform(size=m) if uniforms is None else np.asarray(uniforms, dtype=float)
    xi = rng.uniform(size=m) if prune_uniforms is None else np.asarray(prune_uniforms, dtype=float)
    _set_clip_constant(score, np.vstack([calib.X, test.X]), cs)
    probe_y = np.linspace(calib.y.min() - 1, calib.y.max() + 1, 50)
    score.check_monotone(calib.X[:5], np.append(probe_y, cs[:1]), cs[0])

    test_scores = score(test.X, cs, cs)
    depends_on_c = score.kind == "clip"
    tag = tag or f"jc-{score.kind}"

    if not weighted:
        if depends_on_c:
            uniq, inv = np.unique(cs, return_inverse=True)
            S = _score_matrix(score, calib.X, calib.y, uniq)
            p = np.empty(m)
            for k in range(uniq.size):
                js = np.flatnonzero(inv == k)
                p[js] = conformal_pvalues(S[:, k], test_scores[js], U[js])
        else:
            p = conformal_pvalues(score(calib.X, calib.y, None), test_scores, U)
        k = bh_count(p, task.target_fdr)
        cut = task.target_fdr * k / m if k else NO_CANDIDATE
        sel = np.flatnonzero(p <= cut) if k else np.array([], dtype=int)
        return SelectionReport(sel, np.full(m, cut), p, tag, None, {"bh_rejections": k})

    if task.weights is None or task.test_weights is None:
        raise ValueError("weighted selection needs calibration and test weights")
    imputed = None
    if depends_on_c:
        uniq, inv = np.unique(cs, return_inverse=True)
        V = _score_matrix(score, calib.X, calib.y, uniq)[:, inv]
        if uniq.size > 1:
            imputed = np.column_stack([score(test.X, cs, c) for c in cs])
    else:
        V = score(calib.X, calib.y, None)
    sel, p, cut = weighted_pruned_selection(V, task.weights, test_scores, task.test_weights,
                                            task.target_fdr, xi, imputed)
    return SelectionReport(sel, cut, p, tag, None, {"weighted": True})
