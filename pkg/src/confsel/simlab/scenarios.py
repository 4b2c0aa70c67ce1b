"""Data-generating processes for the simulation scenarios.

Every generator takes a ``numpy.random.Generator`` and returns a
:class:`SimData` holding training, calibration and outcome-free test sets,
the hidden test outcomes, the thresholds, and the labelled covariates used
to estimate covariate-shift weights.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import expit
from scipy.stats import beta as beta_dist

from ..core import Dataset, ThresholdSpec

SCENARIOS = ("S1", "S2a", "S2b", "S2c", "S3", "S4", "S4-shift", "S4-highdim", "causal")

_DEFAULT_C = {"S1": -2.0, "S4": 5.0, "S4-shift": 5.0, "S4-highdim": 5.0}
S4_BETA = np.array([1.0, -1.0, 1.0, 2.0, -1.0, 1.0])


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario identifier plus sample sizes and design knobs.

    threshold
        ``"constant"``, ``"uniform"`` (c_j ~ U[0, 1]) or ``"y0"`` (causal
        control outcome). ``None`` picks the scenario default.
    c
        Constant threshold; ``None`` picks the scenario default.
    box
        Covariate law for S2/S3: ``"symmetric"`` is U[-1, 1]^20, ``"unit"``
        is U[0, 1]^20.
    variance_floor
        Lower bound on the S2/S3 noise variance.
    r, tau0, noise_var, hypothetical
        Causal design: correlation of the potential-outcome errors, constant
        treatment effect, common error variance, and whether the hidden
        truth is an independent fresh draw of Y(1) rather than the unit's
        own Y(1).
    """

    id: str
    n_train: int = 1000
    n_calib: int = 1000
    m: int = 100
    threshold: str | None = None
    c: float | None = None
    seed: int = 0
    box: str = "symmetric"
    variance_floor: float = 0.25
    dim: int | None = None
    r: float = 0.0
    tau0: float = 1.0
    noise_var: float = 2.0
    hypothetical: bool = False

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ScenarioError(f"unknown scenario id {self.id!r}; expected one of {', '.join(SCENARIOS)}")
        for name in ("n_train", "n_calib", "m"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"{name} must be positive")
        if self.resolved_threshold not in ("constant", "uniform", "y0"):
            raise ScenarioError(f"unknown threshold rule {self.threshold!r}")
        if (self.resolved_threshold == "y0") != (self.id == "causal"):
            raise ScenarioError("threshold 'y0' is the causal design's rule and only applies there")
        if self.box not in ("symmetric", "unit"):
            raise ScenarioError(f"unknown covariate box {self.box!r}")
        if not -1 < self.r < 1:
            raise ScenarioError("r must lie in (-1, 1)")
        if self.noise_var <= 0:
            raise ScenarioError("noise_var must be positive")
        if self.variance_floor <= 0:
            raise ScenarioError("variance_floor must be positive")

    @property
    def resolved_threshold(self) -> str:
        if self.threshold is not None:
            return self.threshold
        return "y0" if self.id == "causal" else "constant"

    @property
    def resolved_c(self) -> float:
        return float(self.c) if self.c is not None else _DEFAULT_C.get(self.id, 0.0)

    @property
    def resolved_dim(self) -> int:
        if self.dim is not None:
            return self.dim
        return {"S1": 1, "S4": 5, "S4-shift": 5, "S4-highdim": 20, "causal": 5}.get(self.id, 20)

    @property
    def shifted(self) -> bool:
        return self.id in ("S3", "S4-shift", "causal")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ScenarioError(f"unknown scenario keys: {', '.join(extra)}")
        return cls(**d)


@dataclass
class SimData:
    train: Dataset
    calib: Dataset
    test: Dataset
    hidden: np.ndarray
    thresholds: ThresholdSpec
    shift_X: np.ndarray | None = None
    shift_labels: np.ndarray | None = None  # 1 marks the test-like group

    @property
    def cs(self) -> np.ndarray:
        return self.thresholds.expand(self.test.n)


# ---------------------------------------------------------------------------
# outcome laws


def s1_outcome(X, rng):
    x = X[:, 0]
    comp = rng.uniform(size=x.size) < 0.4
    mu = np.where(comp, -1 + x + x ** 2, 1 - 2 * x)
    return mu + 1.5 * rng.standard_normal(x.size)


def s1_cdf(y, x):
    """Closed-form conditional CDF of the Scenario 1 mixture."""
    from scipy.special import ndtr
    return 0.4 * ndtr((y - (-1 + x + x ** 2)) / 1.5) + 0.6 * ndtr((y - (1 - 2 * x)) / 1.5)


def s2_mean(X):
    return 5 * (X[:, 0] * X[:, 1] + np.exp(X[:, 3] - 1))


def s2_variance(X, variant: str, floor: float):
    mu = s2_mean(X)
    a = np.abs(mu)
    if variant == "a":
        v = np.full(mu.size, 2.25)
    elif variant == "b":
        v = (5.5 - a) / 2
    else:
        # both indicator terms are active on 1 <= |mu| < 2, as written
        v = 0.25 * mu ** 2 * (a < 2) + 0.5 * a * (a >= 1)
    return np.maximum(v, floor)


def s2_outcome(X, rng, variant, floor):
    return s2_mean(X) + np.sqrt(s2_variance(X, variant, floor)) * rng.standard_normal(X.shape[0])


def s4_log_scale(X):
    b = np.zeros(X.shape[1] + 1)
    b[:S4_BETA.size] = S4_BETA
    return b[0] + X @ b[1:] - 2 * X[:, 0] ** 2 - np.log(5.0)


def s4_outcome(X, rng):
    return rng.gamma(5.0, np.exp(s4_log_scale(X)))


# ---------------------------------------------------------------------------
# covariates and shift


def _box(spec: ScenarioSpec, rng, n):
    d = spec.resolved_dim
    if spec.id == "S1":
        return rng.standard_normal((n, 1))
    if spec.id.startswith("S4"):
        return rng.uniform(0, 2, size=(n, d))
    lo = -1.0 if spec.box == "symmetric" else 0.0
    return rng.uniform(lo, 1.0, size=(n, d))


def s3_acceptance(X, box: str = "symmetric"):
    """exp(-x1 + x2 - x3) divided by its supremum on the covariate box."""
    sup = 3.0 if box == "symmetric" else 1.0
    return np.exp(-X[:, 0] + X[:, 1] - X[:, 2] - sup)


def s4_acceptance(X):
    """(1 + B24(x1)) / 4 divided by its supremum 1/2."""
    return (1 + beta_dist.cdf(X[:, 0] / 2, 2, 4)) / 2


def _rejection(draw, accept, rng, m, batch=None):
    """Collect ``m`` draws accepted with probability ``accept(X)``."""
    batch = batch or max(4 * m, 64)
    out = []
    got = 0
    while got < m:
        X = draw(batch)
        keep = rng.uniform(size=batch) < accept(X)
        out.append(X[keep])
        got += int(keep.sum())
    return np.vstack(out)[:m]


# ---------------------------------------------------------------------------


def _thresholds(spec, rng, m):
    rule = spec.resolved_threshold
    if rule == "constant":
        return ThresholdSpec.constant(spec.resolved_c)
    return ThresholdSpec.per_unit(rng.uniform(size=m))


def _outcome(spec, X, rng):
    if spec.id == "S1":
        return s1_outcome(X, rng)
    if spec.id.startswith("S4"):
        return s4_outcome(X, rng)
    variant = "b" if spec.id == "S3" else spec.id[-1]
    return s2_outcome(X, rng, variant, spec.variance_floor)


def _causal(spec: ScenarioSpec, rng) -> SimData:
    """Observational study with a logistic propensity.

    Y(1) = m0(x) + tau(x) + tau0 + e1 and Y(0) = m0(x) + e0 with errors of
    variance ``noise_var`` and correlation r. Calibration keeps the treated
    units of its draw with Y(1); the test keeps the controls, with
    threshold Y(0).
    """
    d = spec.resolved_dim

    def draw(n):
        X = rng.standard_normal((n, d))
        m0 = X[:, 0] + 0.5 * X[:, 1] - 0.5 * X[:, 2]
        tau = 0.5 * X[:, 3]
        sd = np.sqrt(spec.noise_var)
        z0 = rng.standard_normal(n)
        e0 = sd * z0
        e1 = sd * (spec.r * z0 + np.sqrt(1 - spec.r ** 2) * rng.standard_normal(n))
        y1 = m0 + tau + spec.tau0 + e1
        y0 = m0 + e0
        D = rng.uniform(size=n) < expit(-1.0 + 0.8 * X[:, 0] - 0.5 * X[:, 1])
        return X, y0, y1, D, m0 + tau + spec.tau0

    Xtr, _, y1tr, Dtr, _ = draw(spec.n_train)
    Xca, _, y1ca, Dca, _ = draw(spec.n_calib)
    Xte, y0te, y1te, Dte, mu1te = draw(spec.m)
    ctrl = ~Dte
    if Dtr.sum() < 2 or Dca.sum() < 2 or ctrl.sum() < 1:
        raise ScenarioError("causal draw produced too few treated or control units")
    hidden = y1te[ctrl]
    if spec.hypothetical:
        hidden = mu1te[ctrl] + np.sqrt(spec.noise_var) * rng.standard_normal(int(ctrl.sum()))
    return SimData(
        train=Dataset(Xtr[Dtr], y1tr[Dtr]),
        calib=Dataset(Xca[Dca], y1ca[Dca]),
        test=Dataset(Xte[ctrl], hidden=hidden),
        hidden=hidden,
        thresholds=ThresholdSpec.per_unit(y0te[ctrl]),
        shift_X=Xtr,
        shift_labels=(~Dtr).astype(int),
    )


def generate_scenario(spec: ScenarioSpec, rng: np.random.Generator | None = None) -> SimData:
    """Draw one replication of ``spec``; ``rng`` defaults to one seeded by ``spec.seed``."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    if spec.id == "causal":
        return _causal(spec, rng)
    Xtr = _box(spec, rng, spec.n_train)
    ytr = _outcome(spec, Xtr, rng)
    Xca = _box(spec, rng, spec.n_calib)
    yca = _outcome(spec, Xca, rng)
    if spec.id == "S3":
        Xte = _rejection(lambda k: _box(spec, rng, k), lambda X: s3_acceptance(X, spec.box), rng, spec.m)
    elif spec.id == "S4-shift":
        Xte = _rejection(lambda k: _box(spec, rng, k), s4_acceptance, rng, spec.m)
    else:
        Xte = _box(spec, rng, spec.m)
    yte = _outcome(spec, Xte, rng)
    data = SimData(
        train=Dataset(Xtr, ytr),
        calib=Dataset(Xca, yca),
        test=Dataset(Xte, hidden=yte),
        hidden=yte,
        thresholds=_thresholds(spec, rng, spec.m),
    )
    if spec.shifted:
        data.shift_X = np.vstack([Xca, Xte])
        data.shift_labels = np.r_[np.zeros(spec.n_calib, int), np.ones(spec.m, int)]
    return data
