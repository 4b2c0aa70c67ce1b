"""Tree ensembles: regression forest, quantile forest, boosted stumps.

Tree growing is delegated to scikit-learn. Fitted forests can be exported
as explicit node lists and reloaded without scikit-learn objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestRegressor

from ..core import Dataset
from .base import SIGMA_FLOOR, FitReport, GaussianLocationModel, WeightModel


@dataclass
class ForestParams:
    n_trees: int = 500
    min_leaf: int = 5
    max_features: int | None = None  # None -> ceil(dim / 3)
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n_trees", "min_leaf"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def _sk_forest(train: Dataset, params: ForestParams, oob: bool):
    mf = params.max_features or max(1, math.ceil(train.dim / 3))
    rf = RandomForestRegressor(
        n_estimators=params.n_trees, min_samples_leaf=params.min_leaf, max_features=mf,
        max_depth=params.max_depth, bootstrap=True, oob_score=oob, random_state=params.seed,
        n_jobs=1,
    )
    return rf.fit(train.X, train.y)


# ---------------------------------------------------------------------------
# node lists


def export_trees(rf) -> list[dict]:
    out = []
    for est in rf.estimators_:
        t = est.tree_
        out.append({
            "left": t.children_left.tolist(), "right": t.children_right.tolist(),
            "feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
            "value": t.value[:, 0, 0].tolist(),
        })
    return out


class NodeListForest:
    """Pure numpy traversal of exported trees (same split rule as sklearn)."""

    def __init__(self, trees: list[dict]):
        self.trees = [{k: np.asarray(v) for k, v in t.items()} for t in trees]

    def apply(self, X) -> np.ndarray:
        # sklearn compares float32-cast features against the stored thresholds
        X32 = np.asarray(X, dtype=np.float32).astype(np.float64)
        leaves = np.empty((X32.shape[0], len(self.trees)), dtype=np.int64)
        rows = np.arange(X32.shape[0])
        for k, t in enumerate(self.trees):
            node = np.zeros(X32.shape[0], dtype=np.int64)
            while True:
                internal = t["left"][node] >= 0
                if not internal.any():
                    break
                f = np.where(internal, t["feature"][node], 0)
                go_left = X32[rows, f] <= t["threshold"][node]
                nxt = np.where(go_left, t["left"][node], t["right"][node])
                node = np.where(internal, nxt, node)
            leaves[:, k] = node
        return leaves

    def predict(self, X) -> np.ndarray:
        leaves = self.apply(X)
        vals = np.column_stack([t["value"][leaves[:, k]] for k, t in enumerate(self.trees)])
        return vals.mean(1)


# ---------------------------------------------------------------------------
# regression forest with Gaussian residuals


class ForestGaussianModel(GaussianLocationModel):
    family = "forest-gaussian"

    def __init__(self, predictor, sigma: float, trees: list[dict] | None = None):
        self.predictor = predictor
        self._trees = trees
        super().__init__(predictor.predict, sigma)

    def to_dict(self) -> dict:
        trees = self._trees if self._trees is not None else export_trees(self.predictor)
        return {"family": self.family, "sigma": self.sigma, "trees": trees}

    @classmethod
    def from_dict(cls, d):
        return cls(NodeListForest(d["trees"]), d["sigma"], d["trees"])


def fit_forest(train: Dataset, params: ForestParams | None = None, **kw):
    """Bagged CART mean model; sigma from out-of-bag residuals."""
    params = params or ForestParams(**kw)
    rf = _sk_forest(train, params, oob=True)
    oob = rf.oob_prediction_
    ok = np.isfinite(oob)
    resid = train.y[ok] - oob[ok]
    sigma = max(float(np.sqrt(np.mean(resid ** 2))) if ok.any() else 0.0, SIGMA_FLOOR)
    ss = np.sum((train.y[ok] - train.y[ok].mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    model = ForestGaussianModel(rf, sigma)
    rep = FitReport("forest-gaussian", {"sigma": sigma, "n_trees": params.n_trees},
                    float(np.mean(resid ** 2)), params.n_trees, True, flags={"oob_r2": float(r2)})
    return model, rep


# ---------------------------------------------------------------------------
# quantile regression forest


class QuantileForest:
    """Conditional quantiles from leaf co-membership weights.

    Each training outcome gets weight (1/T) sum_t 1{same leaf} / leaf size,
    computed on the full training sample, and Q(t | x) is the weighted
    empirical quantile (left-continuous inverse of the weighted CDF).
    """

    supported_grid = None
    family = "quantile-forest"

    def __init__(self, forest, train_leaves, y_train, trees=None):
        self.forest = forest
        self.train_leaves = np.asarray(train_leaves)
        self.y_train = np.asarray(y_train, dtype=float)
        self._trees = trees
        self._order = np.argsort(self.y_train, kind="stable")
        self._ysorted = self.y_train[self._order]

    def leaf_weights(self, X) -> np.ndarray:
        q_leaves = self.forest.apply(np.atleast_2d(X))
        n = self.y_train.size
        T = self.train_leaves.shape[1]
        W = np.zeros((q_leaves.shape[0], n))
        for t in range(T):
            tl = self.train_leaves[:, t]
            _, inv, counts = np.unique(tl, return_inverse=True, return_counts=True)
            M = q_leaves[:, t][:, None] == tl[None, :]
            W += M * (1.0 / counts[inv])[None, :]
        return W / T

    def predict_quantiles(self, X, levels) -> np.ndarray:
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        W = self.leaf_weights(X)[:, self._order]
        C = np.cumsum(W, axis=1)
        C /= C[:, -1:]
        out = np.empty((W.shape[0], levels.size))
        for i in range(W.shape[0]):
            k = np.searchsorted(C[i], levels - 1e-12, side="left")
            out[i] = self._ysorted[np.minimum(k, self.y_train.size - 1)]
        return out  # nondecreasing in level by construction

    def mean(self, X) -> np.ndarray:
        return self.leaf_weights(X) @ self.y_train

    def to_dict(self):
        trees = self._trees if self._trees is not None else export_trees(self.forest)
        return {"family": self.family, "trees": trees,
                "train_leaves": self.train_leaves.tolist(), "y_train": self.y_train.tolist()}

    @classmethod
    def from_dict(cls, d):
        f = NodeListForest(d["trees"])
        return cls(f, d["train_leaves"], d["y_train"], d["trees"])


def fit_quantile_forest(train: Dataset, params: ForestParams | None = None, **kw):
    params = params or ForestParams(**kw)
    rf = _sk_forest(train, params, oob=False)
    qf = QuantileForest(rf, rf.apply(train.X), train.y)
    rep = FitReport("quantile-forest", {"n_trees": params.n_trees}, float("nan"),
                    params.n_trees, True)
    return qf, rep


# ---------------------------------------------------------------------------
# boosted stumps for covariate-shift weights


def fit_boosted_stumps(X, labels, rounds: int = 100, learning_rate: float = 0.1, seed: int = 0):
    """Gradient-boosted depth-1 trees on logistic loss (1 = test group).

    The weight is odds(x) * n0 / n1. ``trace`` holds the training logistic
    loss after each round.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels, dtype=int).ravel()
    if not (np.any(labels == 1) and np.any(labels == 0)):
        raise ValueError("both labels must be present")
    gb = GradientBoostingClassifier(n_estimators=rounds, learning_rate=learning_rate, max_depth=1,
                                    subsample=1.0, random_state=seed)
    gb.fit(X, labels)
    n1 = labels.sum()
    n0 = labels.size - n1
    wm = WeightModel(gb.decision_function, n0 / n1)
    wm.estimator = gb
    trace = [float(v) for v in gb.train_score_]
    rep = FitReport("boosted-stumps", {"rounds": rounds, "learning_rate": learning_rate},
                    trace[-1], rounds, True, trace)
    return wm, rep
