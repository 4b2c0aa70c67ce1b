"""Selection with a conditional-quantile working model.

Test unit j is selected when c_j <= Q(t_j | x), where the level t_j is picked
from a grid to maximise the calibration power under the error constraint.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .core import Dataset, SelectionReport, SelectionTask
from .engine import normalize_weights

DEFAULT_GRID = np.round(np.arange(0.10, 0.9001, 0.01), 2)


class QuantileModel(Protocol):
    """``predict_quantiles(X, levels)`` returns an ``(n, L)`` array that is
    nondecreasing along the level axis. ``supported_grid`` is ``None`` when
    any level in (0, 1) can be queried."""

    supported_grid: np.ndarray | None

    def predict_quantiles(self, X, levels) -> np.ndarray: ...


def check_grid(levels) -> np.ndarray:
    g = np.atleast_1d(np.asarray(levels, dtype=float))
    if g.size == 0:
        raise ValueError("empty quantile grid")
    if np.any(g <= 0) or np.any(g >= 1):
        raise ValueError("quantile levels must lie in (0, 1)")
    if np.any(np.diff(g) <= 0):
        raise ValueError("quantile levels must be strictly increasing")
    return g


def rearrange(Q) -> np.ndarray:
    """Sort predicted quantiles along the level axis to undo crossings."""
    return np.sort(np.asarray(Q, dtype=float), axis=-1)


def _check_level(qm, t):
    grid = getattr(qm, "supported_grid", None)
    if grid is not None and not np.any(np.isclose(grid, t, rtol=0, atol=1e-12)):
        raise ValueError(f"level {t} is not on the model's supported grid")


def _qcol(calib, qm, t):
    _check_level(qm, t)
    return qm.predict_quantiles(calib.X, [t])[:, 0]


def quantile_error_fn(calib: Dataset, qm: QuantileModel, c: float, t: float, weights=None) -> float:
    """Weighted share of Y <= c among calibration units with c <= Q(t | x)."""
    q = _qcol(calib, qm, t)
    w = normalize_weights(weights, calib.n)
    inside = c <= q
    return float(np.sum(w[inside & (calib.y <= c)]) / max(1.0, np.sum(w[inside])))


def quantile_power_fn(calib: Dataset, qm: QuantileModel, c: float, t: float, weights=None) -> float:
    q = _qcol(calib, qm, t)
    w = normalize_weights(weights, calib.n)
    inside = c <= q
    alt = calib.y > c
    return float(np.sum(w[inside & alt]) / max(1.0, np.sum(w[alt])))


def best_level(Qc, y, w, c, target, grid):
    """Index of the chosen level in ``grid`` or -1 when nothing is admissible.

    ``Qc`` is the ``(n, L)`` calibration quantile table.
    """
    inside = c <= Qc
    null = (y <= c)[:, None]
    wcol = w[:, None]
    err = (wcol * (inside & null)).sum(0) / np.maximum(1.0, (wcol * inside).sum(0))
    pw = (wcol * (inside & ~null)).sum(0) / max(1.0, float(np.sum(w[y > c])))
    adm = np.flatnonzero(err <= target)
    if adm.size == 0:
        return -1
    top = pw[adm].max()
    return int(adm[pw[adm] == top][-1])


def select_quantile(task: SelectionTask, qm: QuantileModel, grid=DEFAULT_GRID,
                    *, tag: str = "np-q") -> SelectionReport:
    """Quantile-model selection with per-unit levels.

    When no level satisfies the constraint the level falls back to half the
    smallest grid level; such units are flagged in
    ``diagnostics["fallback"]``. The report's ``per_unit_eta`` holds the
    chosen level and ``per_unit_ratio`` holds ``c_j - Q(level | x_j)``, so a
    unit is selected exactly when that difference is <= 0.
    """
    grid = check_grid(grid)
    model_grid = getattr(qm, "supported_grid", None)
    if model_grid is not None:
        for t in grid:
            _check_level(qm, t)
    calib = task.calibration
    cs = task.threshold_vector()
    w = normalize_weights(task.weights, calib.n)
    fallback_level = grid[0] / 2
    Qc = qm.predict_quantiles(calib.X, grid)

    uniq, inv = np.unique(cs, return_inverse=True)
    idx_u = np.array([best_level(Qc, calib.y, w, c, task.target_fdr, grid) for c in uniq])
    idx = idx_u[inv]
    fallback = idx < 0
    levels = np.where(fallback, fallback_level, grid[np.maximum(idx, 0)])

    query = np.concatenate([[fallback_level], grid]) if model_grid is None else grid
    Qt = qm.predict_quantiles(task.test.X, query)
    if model_grid is None:
        col = np.where(fallback, 0, idx + 1)
    else:
        # fixed-grid models cannot be queried off-grid; they fall back to t_1
        col = np.maximum(idx, 0)
    qsel = Qt[np.arange(task.m), col]
    stat = cs - qsel
    sel = np.flatnonzero(stat <= 0)
    diag = {"fallback": fallback.tolist(), "quantile_at_level": qsel.tolist()}
    return SelectionReport(sel, levels, stat, tag, None, diag)
