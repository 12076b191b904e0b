"""Time-averaged regret of UCBBP, AUCBBP and epsilon-greedy on the default instance.

Writes per-seed and aggregate CSVs under ``--out/<algorithm>/`` and prints the
seed-mean time-averaged regret at a few checkpoints.
"""

import argparse
from pathlib import Path

from mccb.harness import ExperimentConfig, run_experiment

ALGORITHMS = ("ucbbp", "aucbbp", "epsilon-greedy")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None, help="JSON config; defaults to the built-in defaults")
    parser.add_argument("--out", default="results/regret_curves")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    base = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    checkpoints = sorted({t for t in (200, 500, 1000) if t < base.T} | {base.T})
    print("algorithm        " + "".join(f"t={t:<9d}" for t in checkpoints))
    for alg in ALGORITHMS:
        res = run_experiment(base.replace(algorithm=alg), Path(args.out) / alg, args.workers)
        curve = res.mean("time_avg_regret")
        print(f"{alg:16s} " + "".join(f"{curve[t - 1]:<11.4f}" for t in checkpoints))


if __name__ == "__main__":
    main()
