"""Cumulative regret of AUCBBP and UCBBP over the first episodes with many users."""

import argparse

from mccb.harness import ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--N", type=int, default=200)
    parser.add_argument("--episodes", type=int, default=200)
    parser.add_argument("--out", default="results/early_phase")
    args = parser.parse_args()

    cfg = ExperimentConfig(N=args.N)
    for alg in ("ucbbp", "aucbbp"):
        res = run_experiment(cfg.replace(algorithm=alg), f"{args.out}/{alg}", episodes=args.episodes)
        print(f"{alg:8s} cumulative regret at t={args.episodes}: {res.mean('cum_regret')[-1]:.2f}")


if __name__ == "__main__":
    main()
