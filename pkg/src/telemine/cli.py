"""``telemine`` command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 missing artifact.
The worker count comes from ``run.workers`` unless TELEMINE_WORKERS is set.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .config import ExperimentConfig, bundled_config_path, load_config, validate
from .errors import ConfigError, TelemineError

WORKERS_ENV = "TELEMINE_WORKERS"

COMMANDS = {
    "synth": pipeline.run_synth,
    "prepare": pipeline.run_prepare,
    "featurize": pipeline.run_featurize,
    "train": pipeline.run_train,
    "evaluate": pipeline.run_evaluate,
    "ablate": pipeline.run_ablate,
    "importance": pipeline.run_importance,
    "run": pipeline.run_all,
}

HELP = {
    "synth": "generate the synthetic raw logs described by [synth]",
    "prepare": "align, coverage-filter and impute raw CSV logs",
    "featurize": "split windows, standardize on train samples, compute descriptors",
    "train": "fit the booster and baselines per protocol and seed",
    "evaluate": "score test windows and write reports, PR curves, aggregate table",
    "ablate": "retrain the booster on each descriptor-group subset",
    "importance": "gain share per telemetry family",
    "run": "every stage in order (synth first when [synth] is configured)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telemine",
                                     description="Telemetry window anomaly mining pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="TOML config (default: bundled synthetic config)")
        p.add_argument("--seed", type=int, help="run a single seed instead of run.seeds")
        p.add_argument("--protocol", help="run a single protocol instead of run.protocols")
        p.add_argument("--out", help="run directory (overrides run.out)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config or bundled_config_path())
    if args.out:
        cfg.run.out = args.out
    if args.seed is not None:
        cfg.run.seeds = [args.seed]
    if args.protocol:
        cfg.run.protocols = [args.protocol]
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            cfg.run.workers = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return validate(cfg)


def set_workers(n: int) -> int:
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe, which warns on hosts with an older TBB
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        set_workers(cfg.run.workers)
        COMMANDS[args.command](cfg)
    except TelemineError as exc:
        print(f"telemine {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
