"""Sure independence screening by marginal correlation."""

import numpy as np

from ..core import Dataset


def marginal_correlations(X, y) -> np.ndarray:
    """Absolute Pearson correlation of each column with ``y``; 0 for constant columns."""
    Xc = X - X.mean(0)
    yc = y - y.mean()
    sx = np.sqrt(np.sum(Xc ** 2, axis=0))
    sy = np.sqrt(np.sum(yc ** 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(Xc.T @ yc) / (sx * sy)
    return np.where((sx > 0) & (sy > 0), r, 0.0)


def sis_screen(train: Dataset, keep: int) -> np.ndarray:
    """Indices of the ``keep`` columns most correlated with the outcome.

    Indices come back in ranked order, ties broken by column index.
    ``keep == dim`` means no screening and returns ``0..dim-1`` in order.
    """
    if not 1 <= keep <= train.dim:
        raise ValueError(f"keep must lie in [1, {train.dim}]")
    if keep == train.dim:
        return np.arange(train.dim)
    r = marginal_correlations(train.X, train.y)
    order = np.lexsort((np.arange(r.size), -r))
    return order[:keep]
