"""Command-line front end: run experiments, sweeps, and the analytic table.

Subcommands:

* ``run``: execute one experiment from a config file; writes a per-round
  CSV plus a JSON summary into the output directory.
* ``table1``: print the benign-reviewer-majority probability table.
* ``sweep``: rerun one config while varying a single dotted config key
  across a list of values (seeds held fixed); one output subdirectory per
  value plus a combined CSV.

Exit codes: 0 success, 1 runtime failure, 2 config or usage error. The env
var FEDSIM_THREADS caps sweep parallelism.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import config as config_mod
from .errors import ConfigError, FedsimError
from .fedreview import dominance_probability
from .orchestrator import detection_metrics, run_experiment

CSV_COLUMNS = (
    "round",
    "test_loss",
    "test_accuracy",
    "n_removed",
    "n_adv_estimate",
    "precision_flag",
    "gamma_succ",
    "dynamic_lambda",
)


@dataclass(frozen=True)
class RunSummary:
    """What one finished run reports back."""

    final_accuracy: float
    precision: float
    recall: float
    csv_path: str
    config_hash: str
    wall_seconds: float


def _pct(fraction):
    """Render a fraction as a percentage with 2 decimals."""
    return f"{fraction * 100.0:.2f}"


def _sig6(value):
    """6 significant digits; empty string for missing diagnostics."""
    return "" if value is None else f"{value:.6g}"


def write_round_csv(path, records):
    """Per-round results; accuracy is a percentage, losses/factors 6 sig digits."""
    lines = [",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(
            ",".join(
                (
                    str(rec.round_index),
                    _sig6(rec.test_loss),
                    _pct(rec.test_accuracy),
                    str(len(rec.removed)),
                    str(rec.n_adv_estimate),
                    str(rec.precision_flag),
                    _sig6(rec.gamma_succ),
                    _sig6(rec.dynamic_lambda),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def execute_run(values, out_dir):
    """Run one experiment described by a config-values dict; write artifacts."""
    experiment = config_mod.build_experiment(values)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    records, _final_params = run_experiment(experiment)
    wall = time.perf_counter() - started

    csv_path = out_dir / "rounds.csv"
    write_round_csv(csv_path, records)

    precision = recall = None
    if experiment.defense == "fedreview":
        precision, recall = detection_metrics(records)

    summary = RunSummary(
        final_accuracy=records[-1].test_accuracy,
        precision=precision,
        recall=recall,
        csv_path=str(csv_path),
        config_hash=config_mod.config_hash(values),
        wall_seconds=wall,
    )
    (out_dir / "summary.json").write_text(
        json.dumps(asdict(summary), indent=2, sort_keys=True) + "\n"
    )
    return summary


def _apply_seed_override(values, args):
    if args.seed_override is not None:
        values["master_seed"] = args.seed_override


def cmd_run(args):
    values = config_mod.load_config(args.config)
    _apply_seed_override(values, args)
    summary = execute_run(values, args.out)
    parts = [f"final_accuracy={_pct(summary.final_accuracy)}%"]
    if summary.precision is not None:
        parts.append(f"precision={summary.precision:.4f}")
        parts.append(f"recall={summary.recall:.4f}")
    parts.append(f"rounds_csv={summary.csv_path}")
    print(" ".join(parts))
    return 0


def cmd_table1(args):
    """Probability that benign reviewers hold a majority, by n and p."""
    fractions = (0.2, 0.3, 0.4)
    sizes = (10, 20)
    print("P[#adversarial reviewers <= n/2] for reviewer count n, adversary fraction p")
    print("n\\p " + "".join(f"{p:>9.1f}" for p in fractions))
    for n in sizes:
        cells = "".join(
            f"{dominance_probability(n, p) * 100.0:>8.2f}%" for p in fractions
        )
        print(f"{n:<4d}{cells}")
    return 0


def _sweep_worker(payload):
    values, out_dir = payload
    return execute_run(values, Path(out_dir))


def _worker_cap():
    raw = os.environ.get("FEDSIM_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"FEDSIM_THREADS must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"FEDSIM_THREADS must be >= 1, got {cap}")
    return cap


def cmd_sweep(args):
    base = config_mod.load_config(args.config)
    _apply_seed_override(base, args)
    raw_values = [v for v in (args.values or "").split(",") if v.strip()]
    if not raw_values:
        raise ConfigError("sweep needs a nonempty --values list")

    jobs = []
    out_root = Path(args.out)
    for raw in raw_values:
        values = dict(base)
        values[args.param] = config_mod.parse_value(args.param, raw)
        jobs.append((raw, values, out_root / f"{args.param}={raw.strip()}"))

    workers = min(len(jobs), _worker_cap())
    summaries = []
    if workers <= 1:
        for _, values, out_dir in jobs:
            summaries.append(_sweep_worker((values, out_dir)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(
                pool.map(_sweep_worker, [(v, d) for _, v, d in jobs])
            )

    out_root.mkdir(parents=True, exist_ok=True)
    lines = ["param,value,final_accuracy,precision,recall,config_hash,csv_path"]
    for (raw, _, _), summary in zip(jobs, summaries):
        precision = "" if summary.precision is None else f"{summary.precision:.4f}"
        recall = "" if summary.recall is None else f"{summary.recall:.4f}"
        lines.append(
            ",".join(
                (
                    args.param,
                    raw.strip(),
                    _pct(summary.final_accuracy),
                    precision,
                    recall,
                    summary.config_hash,
                    summary.csv_path,
                )
            )
        )
    (out_root / "sweep.csv").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedsim",
        description="Federated-learning simulator with poisoning attacks and "
        "a reviewer-based defense.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a config file")
    run_p.add_argument("--config", required=True, help="path to the config file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument(
        "--seed-override", type=int, default=None, help="replace master_seed"
    )
    run_p.set_defaults(func=cmd_run)

    t1_p = sub.add_parser(
        "table1", help="print the benign-reviewer-majority probability table"
    )
    t1_p.set_defaults(func=cmd_table1)

    sweep_p = sub.add_parser("sweep", help="run one config across parameter values")
    sweep_p.add_argument("--config", required=True, help="path to the config file")
    sweep_p.add_argument("--out", required=True, help="output directory")
    sweep_p.add_argument(
        "--param", required=True, help="dotted config key to vary, e.g. attack.lambda"
    )
    sweep_p.add_argument(
        "--values", required=True, help="comma-separated list of values"
    )
    sweep_p.add_argument(
        "--seed-override", type=int, default=None, help="replace master_seed"
    )
    sweep_p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FedsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
