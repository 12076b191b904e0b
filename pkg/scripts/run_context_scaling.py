"""AUCBBP context-averaged regret as the number of users per episode grows."""

import argparse

from mccb.harness import ExperimentConfig, run_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--N", default="10,50,200", help="comma-separated user counts")
    parser.add_argument("--T", type=int, default=1000)
    parser.add_argument("--out", default="results/context_scaling")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    cfg = ExperimentConfig(algorithm="aucbbp", T=args.T)
    values = [int(v) for v in args.N.split(",")]
    for res in run_sweep(cfg, "N", values, args.out, args.workers):
        print(f"{res.tag:8s} final context-averaged regret {res.mean('ctx_avg_regret')[-1]:.4f}")


if __name__ == "__main__":
    main()
