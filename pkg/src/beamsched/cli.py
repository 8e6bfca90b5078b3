"""Command-line front end: `beamsched run | counts | oracle`."""
from __future__ import annotations

import argparse
import sys

from .campaign import CampaignConfig, load_config, run_campaign
from .errors import (
    BeamschedError,
    ConfigError,
    EnumerationCapError,
    OracleCapError,
)
from .scheduling import counting

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_IO = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="beamsched",
        description="Multi-beam satellite return-link scheduling campaigns",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a campaign described by a config file")
    run.add_argument("--config", required=True, help="flat key = value campaign file")
    run.add_argument("--seed", type=int, default=None, help="override the seed")
    run.add_argument("--workers", type=int, default=None, help="worker process count")
    run.add_argument("--out", default=None, help="override the output directory")

    counts = sub.add_parser("counts", help="print the scheduling combinatorics")
    counts.add_argument("--m", type=int, required=True, help="users per beam")
    counts.add_argument("--b", type=int, required=True, help="number of beams")

    oracle = sub.add_parser(
        "oracle", help="compare graph scheduling against exhaustive search"
    )
    oracle.add_argument("--m", type=int, required=True)
    oracle.add_argument("--b", type=int, required=True)
    oracle.add_argument("--trials", type=int, default=100)
    oracle.add_argument("--seed", type=int, default=1)
    oracle.add_argument("--out", default="oracle_out")
    return parser


def _cmd_run(args):
    cfg = load_config(
        args.config, seed=args.seed, workers=args.workers, output_dir=args.out
    )
    result = run_campaign(cfg)
    for name, path in sorted(result["files"].items()):
        print(f"{name}: {path}")
    return EXIT_OK


def _cmd_counts(args):
    values = counting(args.m, args.b)
    width = max(len(k) for k in values)
    for key in ("n_users_sched", "n_alloc", "n_paths", "n_eval_es", "n_eval_bg", "n_alloc_fsa"):
        print(f"{key:<{width}}  {values[key]}")
    return EXIT_OK


def _cmd_oracle(args):
    cfg = CampaignConfig(
        experiment="oracle_check",
        m=args.m,
        b=args.b,
        trials=args.trials,
        seed=args.seed,
        output_dir=args.out,
        n_ch=max(args.m, 1),
    )
    result = run_campaign(cfg)
    counters = result["counters"]
    return EXIT_OK if counters["matches"] == counters["trials"] else EXIT_ERROR


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "counts": _cmd_counts, "oracle": _cmd_oracle}[args.command]
    try:
        return handler(args)
    except (EnumerationCapError, OracleCapError) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BeamschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
