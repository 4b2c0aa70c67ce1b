"""Shared domain types, CSV ingestion and role splitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data (bad CSV cells, ragged rows, ...)."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledSample:
    x: np.ndarray
    y: float | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariate matrix with an optional outcome vector.

    ``X`` has shape ``(n, dim)``. ``y`` is ``None`` for test data. Test sets
    built in simulation carry the true outcomes in ``hidden``; selection code
    never reads that field.
    """

    X: np.ndarray
    y: np.ndarray | None = None
    hidden: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] < 1:
            raise DataError("X must be a 2-d array with at least one column")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates must be finite")
        object.__setattr__(self, "X", _frozen(X))
        for name in ("y", "hidden"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=float).ravel()
            if v.shape[0] != X.shape[0]:
                raise DataError(f"{name} has {v.shape[0]} entries, X has {X.shape[0]} rows")
            if not np.all(np.isfinite(v)):
                raise DataError(f"{name} must be finite")
            object.__setattr__(self, name, _frozen(v))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def has_outcomes(self) -> bool:
        return self.y is not None

    @property
    def samples(self) -> list[LabeledSample]:
        ys = [None] * self.n if self.y is None else [float(v) for v in self.y]
        return [LabeledSample(self.X[i], ys[i]) for i in range(self.n)]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            self.X[idx],
            None if self.y is None else self.y[idx],
            None if self.hidden is None else self.hidden[idx],
        )

    def without_outcomes(self) -> "Dataset":
        """Copy with outcomes moved to ``hidden``."""
        return Dataset(self.X, None, self.y if self.y is not None else self.hidden)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "Dataset":
        if not samples:
            raise DataError("no samples")
        dims = {np.atleast_1d(s.x).shape[0] for s in samples}
        if len(dims) != 1:
            raise DataError(f"inconsistent covariate dimensions {sorted(dims)}")
        X = np.vstack([np.atleast_1d(s.x) for s in samples])
        has_y = [s.y is not None for s in samples]
        if any(has_y) and not all(has_y):
            raise DataError("outcomes must be present for all samples or none")
        y = np.array([s.y for s in samples], dtype=float) if all(has_y) else None
        return cls(X, y)


@dataclass(frozen=True, eq=False)
class ThresholdSpec:
    """Either one constant threshold or one threshold per test unit."""

    values: np.ndarray
    kind: str = "constant"

    def __post_init__(self):
        if self.kind not in ("constant", "per-unit"):
            raise ValueError(f"unknown threshold kind {self.kind!r}")
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.kind == "constant" and v.size != 1:
            raise ValueError("constant threshold needs exactly one value")
        if not np.all(np.isfinite(v)):
            raise ValueError("thresholds must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def constant(cls, c: float) -> "ThresholdSpec":
        return cls(np.array([c]), "constant")

    @classmethod
    def per_unit(cls, cs) -> "ThresholdSpec":
        return cls(np.asarray(cs, dtype=float), "per-unit")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def expand(self, m: int) -> np.ndarray:
        if self.is_constant:
            return np.full(m, self.values[0])
        if self.values.size != m:
            raise ValueError(f"{self.values.size} thresholds for {m} test units")
        return self.values.copy()


@dataclass(frozen=True, eq=False)
class SelectionTask:
    calibration: Dataset
    test: Dataset
    thresholds: ThresholdSpec
    target_fdr: float = 0.1
    delta: float = 0.5
    weights: np.ndarray | None = None
    test_weights: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if not self.calibration.has_outcomes:
            raise ValueError("calibration data must carry outcomes")
        if self.test.has_outcomes:
            raise ValueError("test outcomes must not be visible to selection")
        if self.calibration.dim != self.test.dim:
            raise ValueError("calibration and test covariate dimensions differ")
        if not 0.0 < self.target_fdr < 1.0:
            raise ValueError(f"target_fdr must lie in (0, 1), got {self.target_fdr}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not self.thresholds.is_constant and self.thresholds.values.size != self.test.n:
            raise ValueError("per-unit threshold count does not match the test size")
        for name, size in (("weights", self.calibration.n), ("test_weights", self.test.n)):
            w = getattr(self, name)
            if w is None:
                continue
            w = np.asarray(w, dtype=float).ravel()
            if w.size != size:
                raise ValueError(f"{name} has {w.size} entries, expected {size}")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError(f"{name} must be finite and strictly positive")
            object.__setattr__(self, name, _frozen(w))

    @property
    def m(self) -> int:
        return self.test.n

    def threshold_vector(self) -> np.ndarray:
        return self.thresholds.expand(self.test.n)


@dataclass(eq=False)
class SelectionReport:
    """Outcome of a selection pass.

    ``per_unit_eta`` holds the critical value used for each test unit, with
    ``-1`` meaning that no candidate was admissible. For likelihood-ratio
    methods ``per_unit_ratio`` holds R(x; c); for other methods it holds the
    statistic that is compared against ``per_unit_eta``.
    """

    selected: np.ndarray
    per_unit_eta: np.ndarray
    per_unit_ratio: np.ndarray
    method_tag: str
    adjusted_alpha: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.selected = np.unique(np.asarray(self.selected, dtype=int))
        self.per_unit_eta = np.asarray(self.per_unit_eta, dtype=float)
        self.per_unit_ratio = np.asarray(self.per_unit_ratio, dtype=float)

    @property
    def m(self) -> int:
        return self.per_unit_ratio.size

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.m, dtype=bool)
        out[self.selected] = True
        return out

    def to_dict(self) -> dict:
        return {
            "method_tag": self.method_tag,
            "selected": [int(j) for j in self.selected],
            "per_unit_eta": [float(v) for v in self.per_unit_eta],
            "per_unit_ratio": [float(v) for v in self.per_unit_ratio],
            "adjusted_alpha": self.adjusted_alpha,
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionReport":
        return cls(
            selected=np.asarray(d["selected"], dtype=int),
            per_unit_eta=np.asarray(d["per_unit_eta"], dtype=float),
            per_unit_ratio=np.asarray(d["per_unit_ratio"], dtype=float),
            method_tag=d["method_tag"],
            adjusted_alpha=d.get("adjusted_alpha"),
            diagnostics=d.get("diagnostics", {}),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# CSV ingestion


def load_dataset(path, covariates: Sequence[str] | None = None, outcome: str | None = None) -> Dataset:
    """Read a CSV file with a header row into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        UTF-8, comma separated file.
    covariates : sequence of str, optional
        Covariate columns in order. Defaults to every column except
        ``outcome``.
    outcome : str, optional
        Outcome column. ``None`` loads test data without outcomes.

    Rows keep file order. Row numbers in error messages count data rows
    from 1 (the header is row 0).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if covariates is None:
        covariates = [h for h in header if h != outcome]
    missing = [c for c in list(covariates) + ([outcome] if outcome else []) if c not in header]
    if missing:
        raise DataError(f"{path}: columns not found in header: {missing}")
    if not covariates:
        raise DataError(f"{path}: schema names no covariate columns")
    cov_idx = [header.index(c) for c in covariates]
    y_idx = header.index(outcome) if outcome else None

    X = np.empty((len(rows), len(cov_idx)))
    y = np.empty(len(rows)) if outcome else None
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for k, ci in enumerate(cov_idx):
            X[r - 1, k] = _parse_cell(row[ci], path, r, header[ci])
        if y_idx is not None:
            y[r - 1] = _parse_cell(row[y_idx], path, r, header[y_idx])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(X, y)


def _parse_cell(text: str, path, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}: row {row}, column {col}: non-numeric value {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{path}: row {row}, column {col}: non-finite value {text!r}")
    return v


def write_dataset(data: Dataset, path, covariates: Sequence[str] | None = None, outcome: str = "y") -> None:
    """Write ``data`` as CSV. ``repr`` of floats round-trips exactly."""
    names = list(covariates) if covariates else [f"x{k + 1}" for k in range(data.dim)]
    if len(names) != data.dim:
        raise ValueError("covariate name count does not match dim")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ([outcome] if data.has_outcomes else []))
        for i in range(data.n):
            row = [repr(float(v)) for v in data.X[i]]
            if data.has_outcomes:
                row.append(repr(float(data.y[i])))
            w.writerow(row)


def split_roles(data: Dataset, fractions: Iterable[float], seed: int):
    """Shuffle and cut ``data`` into (train, calibration, test).

    Test outcomes are moved into ``test.hidden``.
    """
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f <= 0 for f in fr):
        raise ValueError("fractions must be three positive numbers")
    if sum(fr) > 1 + 1e-12:
        raise ValueError(f"fractions sum to {sum(fr)} > 1")
    n = data.n
    sizes = [int(math.floor(f * n + 1e-9)) for f in fr]
    if any(s == 0 for s in sizes):
        raise ValueError(f"split sizes {sizes} contain an empty role")
    perm = np.random.default_rng(seed).permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    train = data.subset(perm[:a])
    calib = data.subset(perm[a:b])
    test = data.subset(perm[b:b + sizes[2]]).without_outcomes()
    return train, calib, test
