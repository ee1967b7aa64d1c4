"""Command line entry point: ``fewformany {run,radar,stats,gen}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiment
from .core import ConfigurationError
from .problems import make_problem

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("FEWFORMANY_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"FEWFORMANY_WORKERS must be an integer, got {env!r}") from None
    return 1


def cmd_run(args) -> int:
    cfg = experiment.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.runs is not None:
        cfg["runs"] = args.runs
    if args.method:
        unknown = set(args.method) - set(cfg["methods"])
        if unknown:
            raise ConfigurationError(f"--method: {sorted(unknown)} not in config methods {cfg['methods']}")
        cfg["methods"] = [m for m in cfg["methods"] if m in args.method]
    out = Path(args.out or cfg["output_dir"])
    cfg["output_dir"] = str(out)
    cfg = experiment.validate_config(cfg)
    records = experiment.run_experiment(cfg, out, workers=_workers(args))
    print((out / "summary.csv").read_text(encoding="utf-8"), end="")
    failed = [r for r in records if r.status != "ok"]
    if failed:
        print(f"{len(failed)} of {len(records)} runs failed; see {out / 'runs.csv'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_radar(args) -> int:
    methods = args.method or None
    data = experiment.radar_data(args.results, args.run, args.samples, K=args.K, seed=args.seed or 0, methods=methods)
    text = json.dumps(data, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def cmd_stats(args) -> int:
    results = Path(args.results)
    rows = experiment.read_runs(results / "runs.csv")
    comps = experiment.write_stats(Path(args.out) if args.out else results / "stats.csv", rows)
    for c in comps:
        print(f"K={c['K']:<4} {c['metric']:<8} {c['method']:<9} {c['symbol']:<4} p={c['p_value']:.3g}")
    for (method, metric), (p, e, m) in experiment.tally(comps).items():
        print(f"{method:<9} {metric:<8} +/=/- {p}/{e}/{m}")
    return EXIT_OK


def cmd_gen(args) -> int:
    fields = json.loads(args.spec) if args.spec else {}
    if args.seed is not None:
        fields["seed"] = args.seed
    problem = make_problem(args.family, args.epsilon, **fields)
    desc = problem.to_dict()
    desc.update({"m": problem.m, "n": problem.n, "descriptor": problem.descriptor})
    text = json.dumps(desc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.csv:
        if not hasattr(problem, "export_csv"):
            raise ConfigurationError(f"{args.family} problems have no data to export")
        problem.export_csv(args.csv)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fewformany", description="Few solutions for many objectives.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--method", action="append", help="restrict to this method (repeatable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("radar", help="emit radar-plot data for one run")
    p.add_argument("--results", "--out-dir", dest="results", required=True, help="results directory")
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--K", type=int)
    p.add_argument("--seed", type=int, help="objective sampling seed")
    p.add_argument("--method", action="append")
    p.add_argument("--out", help="JSON output file (default stdout)")
    p.set_defaults(func=cmd_radar)

    p = sub.add_parser("stats", help="rank-sum comparison against STCH-Set")
    p.add_argument("--results", required=True)
    p.add_argument("--out", help="stats CSV path (default RESULTS/stats.csv)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen", help="print a problem description")
    p.add_argument("family", choices=["quadratic", "mixed_linear", "mixed_nonlinear"])
    p.add_argument("--spec", help="JSON object of spec fields, e.g. '{\"m\": 128}'")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--out")
    p.add_argument("--csv", help="also write the (a, b) data as CSV")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
