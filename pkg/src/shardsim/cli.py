"""``shardsim`` command-line entry point: run, sweep and verify."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .engine import SimulationStalled, run
from .network import ConfigError, ScenarioConfig, load_scenario
from .presets import PRESETS, get_preset
from .verify import run_all

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

OUT_ENV = "SHARDSIM_OUT"
FORMATS = ("csv", "json")
SWEEP_COLUMNS = ("value", "seed", "final_efficiency", "total_throughput")


class UsageError(Exception):
    pass


def default_out() -> str:
    return os.environ.get(OUT_ENV) or "results"


def parse_formats(text: str) -> tuple[str, ...]:
    items = tuple(dict.fromkeys(x.strip() for x in text.split(",") if x.strip()))
    bad = [x for x in items if x not in FORMATS]
    if bad or not items:
        raise UsageError(f"--format takes a comma list drawn from {', '.join(FORMATS)}; got {text!r}")
    return items


def parse_list(text: str, kind: type, flag: str) -> list[Any]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise UsageError(f"{flag} must list at least one value")
    try:
        return [kind(x) for x in items]
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r} as {kind.__name__} values") from None


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.preset and args.scenario:
        raise UsageError("give either --preset or --scenario, not both")
    if args.scenario:
        path = Path(args.scenario)
        if not path.is_file():
            raise UsageError(f"scenario file not found: {path}")
        config = load_scenario(path)
    elif args.preset:
        try:
            config = get_preset(args.preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    else:
        raise UsageError("one of --preset or --scenario is required")
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def prepare_out(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    formats = parse_formats(args.format)
    out = prepare_out(args.out)
    result = run(config)
    stem = out / f"{config.name}-seed{config.seed}"
    if "csv" in formats:
        result.write_csv(stem.with_suffix(".csv"))
    if "json" in formats:
        result.write_json(stem.with_suffix(".json"))
    s = result.summary
    print(f"{config.name} seed={config.seed}: blocks={s['n_blocks']} "
          f"total_tx={s['total_transactions']} final_efficiency={s['final_efficiency']:.4f}")
    return EXIT_OK


def numeric_fields() -> dict[str, type]:
    out = {}
    for f in dataclasses.fields(ScenarioConfig):
        if f.type in ("int", "float") and f.name != "seed":
            out[f.name] = int if f.type == "int" else float
    return out


def _sweep_job(job: tuple[dict[str, Any], str, Any]) -> dict[str, Any]:
    base, param, value = job
    config = ScenarioConfig.from_dict({**base, param: value})
    summary = run(config).summary
    return {
        "value": value,
        "seed": config.seed,
        "final_efficiency": summary["final_efficiency"],
        "total_throughput": summary["total_transactions"],
    }


def cmd_sweep(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    formats = parse_formats(args.format)
    numeric = numeric_fields()
    if not args.param:
        raise UsageError("--param is required")
    if args.param not in numeric:
        raise UsageError(f"--param must be a numeric scenario field: {', '.join(sorted(numeric))}")
    if args.values is None:
        raise UsageError("--values is required")
    values = parse_list(args.values, numeric[args.param], "--values")
    seeds = parse_list(args.seeds, int, "--seeds") if args.seeds is not None else [config.seed]
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    out = prepare_out(args.out)

    jobs = []
    for value in values:
        for seed in seeds:
            base = config.replace(seed=seed).to_dict()
            ScenarioConfig.from_dict({**base, args.param: value})  # fail fast on bad values
            jobs.append((base, args.param, value))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]

    stem = out / f"{config.name}-sweep-{args.param}"
    if "csv" in formats:
        with open(stem.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    if "json" in formats:
        doc = {"config": config.to_dict(), "param": args.param, "values": values,
               "seeds": seeds, "rows": rows}
        stem.with_suffix(".json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print("\t".join(SWEEP_COLUMNS))
    for r in rows:
        print(f"{r['value']}\t{r['seed']}\t{r['final_efficiency']:.4f}\t{r['total_throughput']}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    if args.m is not None and args.m < 1:
        raise UsageError("--m must be >= 1")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    results = run_all(seed=args.seed or 0, m=args.m, trials=args.trials, inject_fault=args.inject_fault)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shardsim", description="Sharded-ledger pricing simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
        p.add_argument("--scenario", help="path to a scenario JSON file")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", default=default_out(),
                       help=f"output directory (default: ${OUT_ENV} or ./results)")
        p.add_argument("--format", default="csv,json", help="comma list of csv, json")

    p_run = sub.add_parser("run", help="simulate one scenario")
    scenario_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario over a grid of parameter values and seeds")
    scenario_flags(p_sweep)
    p_sweep.add_argument("--param", help="numeric scenario field to vary, e.g. alpha")
    p_sweep.add_argument("--values", help="comma-separated values for --param")
    p_sweep.add_argument("--seeds", help="comma-separated seeds (default: the scenario seed)")
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the property checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--m", type=int, help="pin the shard count")
    p_verify.add_argument("--trials", type=int, default=2000)
    p_verify.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"shardsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationStalled as exc:
        print(f"shardsim: simulation stalled: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
