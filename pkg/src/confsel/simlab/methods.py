"""Configured selection pipelines for the simulation studies.

A :class:`MethodSpec` is a plain picklable description: which working
model to fit on the training data, which selection rule to run, and which
covariate-shift weights (if any) to use. Fitted models are cached per
replication so methods sharing a model (for example NP(LM) and JC(clip))
fit it once.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..baseline import cdf_score, clipped_score, cqr_score, jc_select, residual_score
from ..core import SelectionReport, SelectionTask
from ..engine import select
from ..models import (Basis, ForestParams, fit_boosted_stumps, fit_forest, fit_gamma_glm,
                      fit_gaussian_lm, fit_logistic, fit_mixture_lm, fit_quantile_forest,
                      sis_screen)
from ..powermax import maximize_power, plugin_space
from ..quantsel import select_quantile
from .scenarios import SimData

KINDS = ("np", "npq", "jc")
MODELS = ("lm", "mix", "rf", "ga", "pm-lm", "sis-lm", "pm-sis-lm", "qrf")
SCORES = ("res", "clip", "cdf", "cqr10", "cqr50", "cqr90")
WEIGHTS = (None, "lr", "gbm")
BASES = ("linear", "quadratic", "linear+x1sq")


class MethodError(ValueError):
    pass


@dataclass
class MethodSpec:
    """One pipeline.

    kind
        ``"np"`` likelihood-ratio selection, ``"npq"`` quantile selection,
        ``"jc"`` conformal p-values with BH (or weighted pruning).
    model
        Working model fitted on the training data; for ``"jc"`` it supplies
        the mean (``res``/``clip``), the CDF (``cdf``) or the quantiles
        (``cqr*``, needs ``"qrf"``).
    options
        ``n_trees``, ``min_leaf``, ``restarts``, ``sis_keep``, ``pm_starts``,
        ``pm_width``, ``gbm_rounds``.
    """

    tag: str
    kind: str = "np"
    model: str = "lm"
    score: str | None = None
    weights: str | None = None
    delta: float = 0.5
    basis: str = "linear"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MethodError(f"{self.tag}: unknown kind {self.kind!r}")
        if self.model not in MODELS:
            raise MethodError(f"{self.tag}: unknown model {self.model!r}")
        if self.weights not in WEIGHTS:
            raise MethodError(f"{self.tag}: unknown weights {self.weights!r}")
        if self.basis not in BASES:
            raise MethodError(f"{self.tag}: unknown basis {self.basis!r}")
        if self.kind == "jc" and self.score not in SCORES:
            raise MethodError(f"{self.tag}: jc needs a score in {SCORES}")
        if self.kind == "npq" and self.model != "qrf":
            raise MethodError(f"{self.tag}: quantile selection needs model 'qrf'")
        if self.score and self.score.startswith("cqr") and self.model != "qrf":
            raise MethodError(f"{self.tag}: cqr scores need model 'qrf'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        known = {"tag", "kind", "model", "score", "weights", "delta", "basis", "options"}
        extra = sorted(set(d) - known)
        if extra:
            raise MethodError(f"unknown method keys: {', '.join(extra)}")
        return cls(**d)


def make_basis(name: str, dim: int) -> Basis:
    if name == "linear":
        return Basis.linear(dim)
    if name == "quadratic":
        return Basis.polynomial(dim, 2)
    return Basis.linear(dim).plus(((0, 2),))


class FitCache:
    """Fitted models for one replication, keyed by what determines the fit."""

    def __init__(self, data: SimData, seed: int):
        self.data = data
        self.seed = seed
        self._store: dict = {}

    def get(self, key, build):
        if key not in self._store:
            self._store[key] = build()
        return self._store[key]

    def forest_params(self, opts):
        return ForestParams(n_trees=opts.get("n_trees", 100), min_leaf=opts.get("min_leaf", 5),
                            seed=self.seed)

    def working_model(self, spec: MethodSpec):
        train = self.data.train
        opts = spec.options
        basis = make_basis(spec.basis, train.dim)
        name = spec.model
        if name == "lm":
            return self.get(("lm", spec.basis), lambda: fit_gaussian_lm(train, basis)[0])
        if name == "mix":
            return self.get(("mix", spec.basis, opts.get("restarts", 5)), lambda: fit_mixture_lm(
                train, 2, restarts=opts.get("restarts", 5), seed=self.seed, basis=basis)[0])
        if name == "ga":
            return self.get(("ga", spec.basis), lambda: fit_gamma_glm(train, basis)[0])
        if name == "rf":
            fp = self.forest_params(opts)
            return self.get(("rf", fp.n_trees, fp.min_leaf), lambda: fit_forest(train, fp)[0])
        if name == "qrf":
            fp = self.forest_params(opts)
            return self.get(("qrf", fp.n_trees, fp.min_leaf), lambda: fit_quantile_forest(train, fp)[0])
        if name == "sis-lm":
            keep = min(opts.get("sis_keep", 8), train.dim)
            return self.get(("sis-lm", keep), lambda: fit_gaussian_lm(
                train, Basis.columns(sis_screen(train, keep)))[0])
        raise MethodError(f"{spec.tag}: model {name!r} has no plug-in fit")

    def weight_model(self, kind: str, opts):
        d = self.data
        if d.shift_X is None:
            raise MethodError("scenario has no covariate shift to estimate")
        if kind == "lr":
            return self.get(("lr",), lambda: fit_logistic(d.shift_X, d.shift_labels)[0])
        rounds = opts.get("gbm_rounds", 100)
        return self.get(("gbm", rounds), lambda: fit_boosted_stumps(
            d.shift_X, d.shift_labels, rounds=rounds, seed=self.seed)[0])


def run_method(spec: MethodSpec, cache: FitCache, target: float, uniforms, prune_uniforms,
               seed: int | None = None) -> SelectionReport:
    """Fit (or reuse) the pipeline's models and select on the test set."""
    d = cache.data
    w = tw = None
    if spec.weights:
        wm = cache.weight_model(spec.weights, spec.options)
        w, tw = wm(d.calib.X), wm(d.test.X)
    task = SelectionTask(d.calib, d.test, d.thresholds, target, spec.delta, w, tw, seed)

    if spec.kind == "npq":
        return select_quantile(task, cache.working_model(spec), tag=spec.tag)

    if spec.kind == "jc":
        model = cache.working_model(spec)
        if spec.score == "res":
            score = residual_score(model.mean)
        elif spec.score == "clip":
            score = clipped_score(model.mean)
        elif spec.score == "cdf":
            score = cdf_score(model)
        else:
            score = cqr_score(model, int(spec.score[3:]) / 100)
        return jc_select(task, score, weighted=bool(spec.weights), uniforms=uniforms,
                         prune_uniforms=prune_uniforms, tag=spec.tag)

    if spec.model.startswith("pm-"):
        if not d.thresholds.is_constant:
            raise MethodError(f"{spec.tag}: power maximisation needs a constant threshold")
        base = MethodSpec(spec.tag, "np", spec.model[3:], basis=spec.basis, options=spec.options)
        lm = cache.working_model(base)
        space = plugin_space(lm, spec.options.get("pm_width", 2.0))
        res = maximize_power(d.calib, d.thresholds.values[0], target, space, weights=w,
                             delta=spec.delta, starts=spec.options.get("pm_starts", 10),
                             seed=cache.seed)
        model = res.model(space.family) if res.eta_hat >= 0 else lm
        rep = select(task, model, tag=spec.tag)
        rep.diagnostics["pm_calib_power"] = res.achieved_power
        return rep

    return select(task, cache.working_model(spec), tag=spec.tag)


# ---------------------------------------------------------------------------
# ready-made method sets


def scenario1_methods() -> list[MethodSpec]:
    return [
        MethodSpec("np-mix", "np", "mix", basis="quadratic"),
        MethodSpec("np-lm", "np", "lm", basis="quadratic"),
        MethodSpec("jc-clip", "jc", "lm", score="clip", basis="quadratic"),
    ]


def scenario3_methods() -> list[MethodSpec]:
    return [
        MethodSpec("np-rf", "np", "rf"),
        MethodSpec("np-rf+lr", "np", "rf", weights="lr"),
        MethodSpec("jc-clip", "jc", "rf", score="clip"),
        MethodSpec("jc-clip+lr", "jc", "rf", score="clip", weights="lr"),
        MethodSpec("jc-res+lr", "jc", "rf", score="res", weights="lr"),
    ]


def scenario4_methods(shift: bool = False) -> list[MethodSpec]:
    w = "gbm" if shift else None
    sfx = "+gbm" if shift else ""
    return [
        MethodSpec("np-ga" + sfx, "np", "ga", weights=w, basis="linear+x1sq"),
        MethodSpec("np-lm" + sfx, "np", "lm", weights=w),
        MethodSpec("np-pm-lm" + sfx, "np", "pm-lm", weights=w),
        MethodSpec("np-rf" + sfx, "np", "rf", weights=w),
        MethodSpec("jc-clip" + sfx, "jc", "lm", score="clip", weights=w),
    ]


def highdim_methods() -> list[MethodSpec]:
    return [
        MethodSpec("np-sis-lm", "np", "sis-lm"),
        MethodSpec("np-pm-sis-lm", "np", "pm-sis-lm"),
    ]


def causal_methods() -> list[MethodSpec]:
    return [
        MethodSpec("np-rf+gbm", "np", "rf", weights="gbm"),
        MethodSpec("np-qrf+gbm", "npq", "qrf", weights="gbm"),
        MethodSpec("jc-clip+gbm", "jc", "rf", score="clip", weights="gbm"),
    ]


PRESETS = {
    "S1": scenario1_methods,
    "S3": scenario3_methods,
    "S4": scenario4_methods,
    "S4-shift": lambda: scenario4_methods(shift=True),
    "S4-highdim": highdim_methods,
    "causal": causal_methods,
}
