"""Hidden-truth evaluation and Monte-Carlo replication."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import SelectionReport, ThresholdSpec
from .methods import FitCache, MethodSpec, run_method
from .scenarios import ScenarioSpec, generate_scenario


def evaluate_selection(report: SelectionReport, hidden, thresholds) -> tuple[float, float]:
    """(FDP, power) of a selection against the hidden outcomes.

    FDP = #false selections / (1 v |S|) and power = #true selections /
    (1 v #exceedances), so an empty selection scores (0, 0).
    """
    y = np.asarray(hidden, dtype=float)
    cs = thresholds.expand(y.size) if isinstance(thresholds, ThresholdSpec) else np.broadcast_to(
        np.asarray(thresholds, dtype=float), y.shape)
    if report.m != y.size or cs.size != y.size:
        raise ValueError(f"report covers {report.m} units but {y.size} outcomes were given")
    alt = y > cs
    sel = report.mask
    fdp = np.sum(sel & ~alt) / max(1, int(sel.sum()))
    power = np.sum(sel & alt) / max(1, int(alt.sum()))
    return float(fdp), float(power)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Counter-based stream for replication ``rep``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep])))


@dataclass
class ReplicationSummary:
    """Per-method (FDP, power, size) records with aggregates.

    ``failures`` counts replications where a method raised; those are
    excluded from that method's aggregates and listed in ``errors``.
    """

    scenario: str
    per_method: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    reps: int = 0

    def record(self, tag, rep, fdp, power, size):
        self.per_method.setdefault(tag, []).append((rep, fdp, power, size))
        self.failures.setdefault(tag, 0)

    def fail(self, tag, rep, msg):
        self.per_method.setdefault(tag, [])
        self.failures[tag] = self.failures.get(tag, 0) + 1
        self.errors.append({"method": tag, "rep": rep, "error": msg})

    def aggregates(self) -> dict:
        out = {}
        for tag, rows in self.per_method.items():
            a = np.array([r[1:] for r in rows], dtype=float).reshape(-1, 3)
            k = a.shape[0]

            def se(col):
                return float(np.std(col, ddof=1) / np.sqrt(k)) if k > 1 else 0.0

            out[tag] = {
                "reps_ok": k,
                "failures": self.failures.get(tag, 0),
                "mean_fdp": float(a[:, 0].mean()) if k else float("nan"),
                "se_fdp": se(a[:, 0]),
                "mean_power": float(a[:, 1].mean()) if k else float("nan"),
                "se_power": se(a[:, 1]),
                "mean_size": float(a[:, 2].mean()) if k else float("nan"),
            }
        return out

    def to_json(self) -> str:
        return json.dumps({"scenario": self.scenario, "reps": self.reps,
                           "aggregates": self.aggregates(), "errors": self.errors}, indent=2)

    def write(self, out_dir, stem: str = "summary") -> tuple[str, str]:
        """Write ``<stem>.csv`` (method x replication rows) and ``<stem>.json``."""
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}.json")
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["scenario", "method", "rep", "fdp", "power", "size"])
            for tag, rows in self.per_method.items():
                for rep, fdp, power, size in rows:
                    wr.writerow([self.scenario, tag, rep, repr(fdp), repr(power), size])
        with open(json_path, "w") as fh:
            fh.write(self.to_json())
        return csv_path, json_path

    def lines(self) -> list[str]:
        out = []
        for tag, a in self.aggregates().items():
            out.append(f"{self.scenario} {tag}: FDP {a['mean_fdp']:.4f} (se {a['se_fdp']:.4f}) "
                       f"power {a['mean_power']:.4f} (se {a['se_power']:.4f}) "
                       f"reps {a['reps_ok']} failures {a['failures']}")
        return out


def run_one(spec: ScenarioSpec, methods, rep: int, seed: int, target: float):
    """All methods on one replication; returns (rep, [(tag, result or error)])."""
    rng = replication_rng(seed, rep)
    data = generate_scenario(spec, rng)
    m = data.test.n
    uniforms = rng.uniform(size=m)
    prune = rng.uniform(size=m)
    fit_seed = int(rng.integers(2 ** 31))
    cache = FitCache(data, fit_seed)
    out = []
    for meth in methods:
        try:
            rep_ = run_method(meth, cache, target, uniforms, prune, seed=fit_seed)
            fdp, power = evaluate_selection(rep_, data.hidden, data.thresholds)
            out.append((meth.tag, (fdp, power, rep_.selected.size)))
        except Exception as exc:  # recorded per replication, never fatal
            out.append((meth.tag, f"{type(exc).__name__}: {exc}"))
    return rep, out


def _run_one_star(args):
    return run_one(*args)


def run_replications(spec: ScenarioSpec, methods: list[MethodSpec], reps: int,
                     seed: int | None = None, target: float = 0.1,
                     threads: int = 1) -> ReplicationSummary:
    """Run ``reps`` paired replications of every method.

    Replication ``k`` draws from its own Philox stream keyed by
    ``(seed, k)``, so results do not depend on ``threads``. All methods in a
    replication share the datasets and the tie-break uniforms.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if len({m.tag for m in methods}) != len(methods):
        raise ValueError("method tags must be unique")
    seed = spec.seed if seed is None else seed
    jobs = [(spec, methods, k, seed, target) for k in range(reps)]
    if threads == 1:
        results = [run_one(*j) for j in jobs]
    else:
        workers = None if threads == 0 else threads
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one_star, jobs))
    summary = ReplicationSummary(spec.id, reps=reps)
    for m in methods:
        summary.per_method[m.tag] = []
        summary.failures[m.tag] = 0
    for rep, out in sorted(results, key=lambda r: r[0]):
        for tag, res in out:
            if isinstance(res, str):
                summary.fail(tag, rep, res)
            else:
                summary.record(tag, rep, *res)
    return summary
