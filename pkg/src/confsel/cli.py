"""Command-line interface: ``confsel select | simulate | report``.

Each command reads a JSON config (``--config``); ``--seed``, ``--threads``
and ``--out`` override the matching config keys. ``--threads`` falls back
to the ``CONFSEL_THREADS`` environment variable, then to the config, then
to 1. Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baseline import ScoreContractError
from .core import DataError, ThresholdSpec, load_dataset
from .engine import ModelContractError
from .models import RankDeficientError
from .models.mixture import EMMonotonicityError
from .simlab import (PRESETS, FitCache, MethodError, MethodSpec, ScenarioError, ScenarioSpec,
                     SimData, run_method, run_replications)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

SELECT_KEYS = {"train", "calibration", "test", "covariates", "outcome", "method", "threshold",
               "target_fdr", "delta", "seed", "threads", "out"}
SIMULATE_KEYS = {"scenario", "methods", "reps", "target_fdr", "seed", "threads", "out"}
REPORT_KEYS = {"inputs", "out"}
AGG_FIELDS = ("reps_ok", "failures", "mean_fdp", "se_fdp", "mean_power", "se_power", "mean_size")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling


def _load_config(path, allowed: set) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    extra = sorted(set(cfg) - allowed)
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(extra)}")
    return cfg


def _apply_flags(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.threads is not None:
        cfg["threads"] = args.threads
    elif os.environ.get("CONFSEL_THREADS"):
        try:
            cfg["threads"] = int(os.environ["CONFSEL_THREADS"])
        except ValueError:
            raise ConfigError("CONFSEL_THREADS must be an integer") from None
    return cfg


def _require(cfg, key):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"missing required config key {key!r}")
    return cfg[key]


def _target(cfg) -> float:
    a = cfg.get("target_fdr", 0.1)
    if not isinstance(a, (int, float)) or not 0 < a < 1:
        raise ConfigError(f"target_fdr must lie in (0, 1), got {a!r}")
    return float(a)


def _int(cfg, key, default, lo=0):
    v = cfg.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}, got {v!r}")
    return v


def _method(d) -> MethodSpec:
    if not isinstance(d, dict):
        raise ConfigError("method must be a JSON object")
    try:
        return MethodSpec.from_dict(d)
    except TypeError as exc:
        raise ConfigError(f"bad method descriptor: {exc}") from None


# ---------------------------------------------------------------------------
# select


def _header(path) -> list[str]:
    try:
        with open(path, newline="") as fh:
            return next(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except StopIteration:
        raise DataError(f"{path}: empty file") from None


def _thresholds(spec, test_path, m: int) -> ThresholdSpec:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ThresholdSpec.constant(float(spec))
    if isinstance(spec, list):
        if len(spec) != m:
            raise ConfigError(f"threshold lists {len(spec)} values for {m} test units")
        return ThresholdSpec.per_unit(np.asarray(spec, dtype=float))
    if isinstance(spec, dict) and set(spec) == {"column"}:
        col = load_dataset(test_path, [spec["column"]])
        return ThresholdSpec.per_unit(col.X[:, 0])
    raise ConfigError("threshold must be a number, a list, or {\"column\": name}")


def cmd_select(cfg: dict) -> int:
    target = _target(cfg)
    method = _method(_require(cfg, "method"))
    if "delta" in cfg:
        if not isinstance(cfg["delta"], (int, float)) or cfg["delta"] < 0:
            raise ConfigError(f"delta must be a non-negative number, got {cfg['delta']!r}")
        method.delta = float(cfg["delta"])
    seed = _int(cfg, "seed", 0)
    out = Path(_require(cfg, "out"))
    outcome = cfg.get("outcome", "y")
    paths = {k: _require(cfg, k) for k in ("train", "calibration", "test")}
    thr = _require(cfg, "threshold")
    covs = cfg.get("covariates")
    if covs is None:
        skip = {outcome} | ({thr["column"]} if isinstance(thr, dict) and "column" in thr else set())
        covs = [c for c in _header(paths["calibration"]) if c not in skip]
    train = load_dataset(paths["train"], covs, outcome)
    calib = load_dataset(paths["calibration"], covs, outcome)
    test = load_dataset(paths["test"], covs)
    thresholds = _thresholds(thr, paths["test"], test.n)
    data = SimData(train, calib, test, None, thresholds,
                   np.vstack([calib.X, test.X]), np.r_[np.zeros(calib.n), np.ones(test.n)].astype(int))
    rng = np.random.default_rng(seed)
    uniforms, prune = rng.uniform(size=test.n), rng.uniform(size=test.n)
    report = run_method(method, FitCache(data, seed), target, uniforms, prune, seed=seed)

    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    with open(out / "selection.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "ratio", "eta", "selected"])
        mask = report.mask
        for j in range(report.m):
            wr.writerow([j, repr(float(report.per_unit_ratio[j])), repr(float(report.per_unit_eta[j])),
                         int(mask[j])])
    print(f"{report.method_tag}: selected {report.selected.size} of {report.m} test units")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: dict) -> int:
    sc = _require(cfg, "scenario")
    try:
        spec = ScenarioSpec(sc) if isinstance(sc, str) else ScenarioSpec.from_dict(sc)
    except TypeError as exc:
        raise ConfigError(f"bad scenario descriptor: {exc}") from None
    meths = cfg.get("methods")
    if meths is None or isinstance(meths, str):
        key = meths or spec.id
        if key not in PRESETS:
            raise ConfigError(f"no method preset {key!r}; available: {', '.join(PRESETS)}")
        methods = PRESETS[key]()
    elif isinstance(meths, list) and meths:
        methods = [_method(m) for m in meths]
    else:
        raise ConfigError("methods must be a preset name or a non-empty list")
    reps = _int(cfg, "reps", 10, lo=1)
    seed = _int(cfg, "seed", spec.seed)
    threads = _int(cfg, "threads", 1)
    out = _require(cfg, "out")
    summary = run_replications(spec, methods, reps, seed=seed, target=_target(cfg), threads=threads)
    summary.write(out, spec.id)
    for line in summary.lines():
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def _read_summary(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(d, dict) or not {"scenario", "aggregates"} <= set(d):
        raise DataError(f"{path}: not a replication summary (needs 'scenario' and 'aggregates')")
    for tag, agg in d["aggregates"].items():
        missing = [f for f in AGG_FIELDS if f not in agg]
        if missing:
            raise DataError(f"{path}: method {tag!r} lacks fields {missing}")
    return d


def cmd_report(cfg: dict) -> int:
    inputs = cfg.get("inputs") or []
    if not inputs:
        raise ConfigError("report needs at least one summary JSON")
    out = _require(cfg, "out")
    rows, seen, dups = [], {}, []
    for p in inputs:
        d = _read_summary(p)
        for tag, agg in d["aggregates"].items():
            key = (d["scenario"], tag)
            if key in seen:
                dups.append(f"{key[0]}/{key[1]} ({seen[key]}, {p})")
                continue
            seen[key] = p
            rows.append([d["scenario"], tag] + [agg[f] for f in AGG_FIELDS])
    if dups:
        raise DataError("duplicate (scenario, method) keys: " + "; ".join(dups))
    out = Path(out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "report.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "method", *AGG_FIELDS])
        wr.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confsel", description="Conformal selection by likelihood ratios.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("select", "select test units from CSV data"),
                        ("simulate", "run a Monte-Carlo simulation study"),
                        ("report", "merge simulation summaries into one table")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker processes, 0 = auto (default $CONFSEL_THREADS or 1)")
        p.add_argument("--out", help="output directory (overrides the config)")
        if name == "report":
            p.add_argument("inputs", nargs="*", help="summary JSON files")
    return parser


_COMMANDS = {"select": (cmd_select, SELECT_KEYS), "simulate": (cmd_simulate, SIMULATE_KEYS),
             "report": (cmd_report, REPORT_KEYS)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn, keys = _COMMANDS[args.command]
    try:
        cfg = _apply_flags(_load_config(args.config, keys), args)
        if args.command == "report":
            cfg.pop("seed", None)
            cfg.pop("threads", None)
            if args.inputs:
                cfg["inputs"] = args.inputs
        return fn(cfg)
    except (ConfigError, MethodError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ModelContractError, ScoreContractError, RankDeficientError, EMMonotonicityError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining validation errors come from user-supplied values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
