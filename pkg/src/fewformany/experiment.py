"""Seeded experiment grids, result files and rank-sum summaries.

A results directory holds:

``config.json``      the resolved configuration
``runs.csv``         one row per (K, method, run)
``summary.csv``      mean worst/average per cell, one column per method
``stats.csv``        rank-sum symbols of every method against STCH-Set
``solutions.jsonl``  final solution sets (for ``radar``)
``timings.csv``      wall-clock seconds per run (kept apart so the other
                     files are reproducible byte for byte)
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from .core import ConfigurationError, SmoothingConfig
from .metrics import RunRecord, wilcoxon_rank_sum
from .optimize import DivergenceError, Method, OptimizerConfig, child_seed, run_method
from .problems import problem_from_dict

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REFERENCE = Method.STCH_SET.value
METHOD_NAMES = [m.value for m in Method]

_SMOOTHING_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mu_outer": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "mu_inner": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "schedule": {"enum": ["fixed", "exponential"]},
        "decay_rate": {"type": "number", "minimum": 0},
        "floor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
}

_OPTIMIZER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "iterations": {"type": "integer", "minimum": 1},
        "step_size": {"type": "number", "exclusiveMinimum": 0},
        "step_schedule": {"enum": ["constant", "decay"]},
        "smoothing": _SMOOTHING_SCHEMA,
        "checkpoint_every": {"type": "integer", "minimum": 1},
        "preference_concentration": {"type": "number", "exclusiveMinimum": 0},
        "som_init_steps": {"type": "integer", "minimum": 0},
        "som_update_steps": {"type": "integer", "minimum": 0},
        "som_rounds": {"type": "integer", "minimum": 1},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "problem", "methods", "K"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"enum": ["quadratic", "mixed_linear", "mixed_nonlinear"]},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "spec": {"type": "object"},
            },
        },
        "methods": {"type": "array", "minItems": 1, "uniqueItems": True, "items": {"enum": METHOD_NAMES}},
        "K": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "optimizer": _OPTIMIZER_SCHEMA,
        "per_method": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: _OPTIMIZER_SCHEMA for name in METHOD_NAMES},
        },
        "output_dir": {"type": "string"},
    },
}

DEFAULTS = {"runs": 50, "seed": 0, "optimizer": {}, "per_method": {}, "output_dir": "results"}

RADAR_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["run", "seed", "K", "objectives", "methods"],
    "properties": {
        "run": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "K": {"type": "integer", "minimum": 1},
        "objectives": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "methods": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["values", "envelope"],
                "properties": {
                    "values": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                    "envelope": {"type": "array", "items": {"type": "number"}},
                },
            },
        },
    },
}


def validate_config(cfg: dict) -> dict:
    """Validate against :data:`CONFIG_SCHEMA` and fill defaults.

    Raises :class:`ConfigurationError` naming the offending field.
    """
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors]
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(lines))
    out = copy.deepcopy(DEFAULTS)
    out.update(copy.deepcopy(cfg))
    out["problem"].setdefault("epsilon", 0.1)
    out["problem"].setdefault("spec", {})
    try:
        problem_from_dict({**out["problem"], "spec": {**out["problem"]["spec"], "seed": 0}})
    except (ConfigurationError, TypeError) as exc:
        raise ConfigurationError(f"problem/spec: {exc}") from None
    return out


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from None
    return validate_config(cfg)


def optimizer_for(cfg: dict, method: str, seed: int) -> OptimizerConfig:
    opts = {**cfg["optimizer"], **cfg["per_method"].get(method, {})}
    smoothing = opts.pop("smoothing", None)
    known = {f.name for f in fields(OptimizerConfig)}
    kwargs = {k: v for k, v in opts.items() if k in known}
    if smoothing is not None:
        sm = dict(smoothing)
        if sm.get("schedule", "exponential") == "exponential":
            kwargs["smoothing"] = SmoothingConfig.adaptive(
                start=sm.get("mu_inner", 1.0),
                decay_rate=sm.get("decay_rate", 3e-3),
                floor=sm.get("floor", 0.05),
                outer=sm.get("mu_outer"),
            )
        else:
            kwargs["smoothing"] = SmoothingConfig(**sm)
    return OptimizerConfig(method=method, seed=seed, **kwargs)


def run_seed(cfg: dict, run: int) -> int:
    return cfg["seed"] + run


def build_problem(cfg: dict, run: int):
    """Problem for run ``run``; its generator seed comes from the run's problem stream."""
    seed = run_seed(cfg, run)
    problem_seed = int(child_seed(seed, 0).generate_state(1)[0])
    spec = {**cfg["problem"]["spec"], "seed": problem_seed}
    return problem_from_dict({**cfg["problem"], "spec": spec})


def _cells(cfg):
    return [(K, method, run) for K in cfg["K"] for method in cfg["methods"] for run in range(cfg["runs"])]


def run_cell(cfg: dict, K: int, method: str, run: int):
    """One optimization run; failures come back as a failed record."""
    seed = run_seed(cfg, run)
    problem = build_problem(cfg, run)
    opt = optimizer_for(cfg, method, seed)
    t0 = time.perf_counter()
    try:
        X, _ = run_method(problem, opt, K)
    except DivergenceError as exc:
        return RunRecord.failed(method, seed, K, str(exc), time.perf_counter() - t0), None
    F, _ = problem.evaluate(X.solutions, gradients=False)
    return RunRecord.from_matrix(method, seed, F, time.perf_counter() - t0), X.solutions


def _run_cell_star(args):
    return run_cell(*args)


def run_experiment(cfg: dict, out_dir, workers: int = 1) -> list[RunRecord]:
    """Run every (K, method, run) cell and write the result files.

    Results are gathered in grid order, so the output does not depend on
    ``workers``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, K, method, run) for K, method, run in _cells(cfg)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_star, jobs))
    else:
        results = [_run_cell_star(j) for j in jobs]
    records = [r for r, _ in results]
    for (_, K, method, run), (rec, _) in zip(jobs, results):
        level = logging.WARNING if rec.status != "ok" else logging.INFO
        log.log(level, "K=%d %s run %d: worst=%.4g average=%.4g %s", K, method, run, rec.worst, rec.average, rec.message)

    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_runs(out / "runs.csv", jobs, records)
    write_summary(out / "summary.csv", cfg, records)
    with open(out / "solutions.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for (_, K, method, run), (_, X) in zip(jobs, results):
            row = {"K": K, "method": method, "run": run, "solutions": None if X is None else X.tolist()}
            fh.write(json.dumps(row) + "\n")
    with open(out / "timings.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "method", "run", "wall_time"])
        for (_, K, method, run), rec in zip(jobs, records):
            w.writerow([K, method, run, f"{rec.wall_time:.3f}"])
    if REFERENCE in cfg["methods"] and len(cfg["methods"]) > 1:
        write_stats(out / "stats.csv", read_runs(out / "runs.csv"))
    return records


def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.6e}"


RUN_FIELDS = ["K", "method", "run", "seed", "status", "worst", "average", "message"]


def write_runs(path, jobs, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_FIELDS)
        for (_, K, method, run), rec in zip(jobs, records):
            w.writerow([K, method, run, rec.seed, rec.status, _fmt(rec.worst), _fmt(rec.average), rec.message])


def read_runs(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["K"], r["run"], r["seed"] = int(r["K"]), int(r["run"]), int(r["seed"])
        r["worst"], r["average"] = float(r["worst"]), float(r["average"])
    return rows


def _group(rows):
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["K"], r["method"]), []).append(r)
    return cells


def write_summary(path, cfg, records):
    """Table-shaped summary: one row per (K, metric), one column per method.

    A cell with any failed run reads ``failed``.
    """
    rows = [{"K": r.K, "method": r.method, "status": r.status, "worst": r.worst, "average": r.average} for r in records]
    cells = _group(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "metric"] + cfg["methods"])
        for K in cfg["K"]:
            for metric in ("worst", "average"):
                line = [K, metric]
                for method in cfg["methods"]:
                    cell = cells.get((K, method), [])
                    if any(r["status"] != "ok" for r in cell):
                        line.append("failed")
                    else:
                        line.append(_fmt(float(np.mean([r[metric] for r in cell]))))
                w.writerow(line)


def compare_to_reference(rows: list[dict]) -> list[dict]:
    """Rank-sum symbol of each method against STCH-Set per (K, metric).

    ``+`` means STCH-Set is significantly better. Cells with fewer than two
    successful runs on either side get ``n/a``.
    """
    cells = _group(rows)
    methods = list(dict.fromkeys(r["method"] for r in rows))
    Ks = sorted({r["K"] for r in rows})
    if REFERENCE not in methods:
        raise ConfigurationError(f"results contain no {REFERENCE} runs to compare against")
    if len(methods) < 2:
        raise ConfigurationError("need at least two methods")
    out = []
    for K in Ks:
        ref = [r for r in cells.get((K, REFERENCE), []) if r["status"] == "ok"]
        for metric in ("worst", "average"):
            for method in methods:
                if method == REFERENCE:
                    continue
                other = [r for r in cells.get((K, method), []) if r["status"] == "ok"]
                if len(ref) < 2 or len(other) < 2:
                    out.append({"K": K, "metric": metric, "method": method, "symbol": "n/a", "p_value": float("nan")})
                    continue
                res = wilcoxon_rank_sum([r[metric] for r in ref], [r[metric] for r in other])
                out.append({"K": K, "metric": metric, "method": method, "symbol": res.symbol, "p_value": res.p_value})
    return out


def tally(comparisons: list[dict]) -> dict:
    """``{(method, metric): (plus, equal, minus)}`` over all K."""
    counts: dict = {}
    for c in comparisons:
        key = (c["method"], c["metric"])
        plus, eq, minus = counts.get(key, (0, 0, 0))
        plus += c["symbol"] == "+"
        eq += c["symbol"] == "="
        minus += c["symbol"] == "-"
        counts[key] = (plus, eq, minus)
    return counts


def write_stats(path, rows) -> list[dict]:
    comps = compare_to_reference(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "metric", "method", "symbol", "p_value"])
        for c in comps:
            w.writerow([c["K"], c["metric"], c["method"], c["symbol"], _fmt(c["p_value"])])
        for (method, metric), (p, e, m) in tally(comps).items():
            w.writerow(["all", metric, method, f"{p}/{e}/{m}", ""])
    return comps


def read_solutions(results_dir) -> list[dict]:
    with open(Path(results_dir) / "solutions.jsonl", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def radar_data(results_dir, run: int, sample_count: int, K: int | None = None, seed: int = 0, methods=None) -> dict:
    """Per-solution values on ``sample_count`` sampled objectives, per method.

    The objectives are drawn without replacement from ``seed`` and listed in
    ascending order; ``sample_count >= m`` uses every objective.
    """
    results_dir = Path(results_dir)
    with open(results_dir / "config.json", encoding="utf-8") as fh:
        cfg = validate_config(json.load(fh))
    if not 0 <= run < cfg["runs"]:
        raise ConfigurationError(f"run {run} not in results (runs={cfg['runs']})")
    K = cfg["K"][0] if K is None else K
    sols = [s for s in read_solutions(results_dir) if s["run"] == run and s["K"] == K]
    if methods:
        sols = [s for s in sols if s["method"] in methods]
    if not sols:
        raise ConfigurationError(f"no solutions stored for run {run}, K={K}")
    problem = build_problem(cfg, run)
    if sample_count >= problem.m:
        idx = np.arange(problem.m)
    else:
        idx = np.sort(np.random.default_rng(seed).choice(problem.m, size=sample_count, replace=False))
    data = {"run": run, "seed": run_seed(cfg, run), "K": K, "objectives": idx.tolist(), "methods": {}}
    for s in sols:
        if s["solutions"] is None:
            continue
        F, _ = problem.evaluate(np.asarray(s["solutions"]), gradients=False)
        F = F[idx]
        data["methods"][s["method"]] = {"values": F.T.tolist(), "envelope": F.min(axis=1).tolist()}
    return data
