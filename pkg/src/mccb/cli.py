"""Command line entry point: ``mccb run | sweep | validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from mccb.errors import ConfigError, InvariantError
from mccb.harness import ExperimentConfig, parse_axis, run_experiment, run_sweep
from mccb.validate import validate


def _summary(res) -> str:
    tavg = res.mean("time_avg_regret")
    ctx = res.mean("ctx_avg_regret")
    tag = f"[{res.tag}] " if res.tag else ""
    return (
        f"{tag}{res.config.algorithm}: seeds={len(res.runs)} T={res.config.T} "
        f"final time-avg regret={tavg[-1]:.6g} final ctx-avg regret={ctx[-1]:.6g}"
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mccb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (overrides config 'output')")
    p_run.add_argument("--workers", type=int, default=1)

    p_sweep = sub.add_parser("sweep", help="run a config once per axis value")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True, help="name=v1,v2,... e.g. N=10,50,200")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--workers", type=int, default=1)

    p_val = sub.add_parser("validate", help="run the randomized property suite")
    p_val.add_argument("--instances", type=int, default=1000)
    p_val.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.command == "validate":
            report = validate(args.instances, args.seed)
            print(report.format())
            return 0 if report.ok else 1
        cfg = ExperimentConfig.from_json(args.config)
        if args.command == "run":
            print(_summary(run_experiment(cfg, args.out, args.workers)))
        else:
            axis, values = parse_axis(args.axis)
            for res in run_sweep(cfg, axis, values, args.out, args.workers):
                print(_summary(res))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
