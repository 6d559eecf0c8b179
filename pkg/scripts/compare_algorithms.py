"""Run several agents on one synthetic environment and print a regret table.

Example:
    python3 scripts/compare_algorithms.py --T 500 --trials 5 --out out/compare
"""

import argparse
from pathlib import Path

from neural_rbmle.harness import ALGO_NAMES, ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--algos", default="random,lin-rbmle,neural-ucb,rbmle-ga,rbmle-pc",
                        help=f"comma-separated subset of {ALGO_NAMES}")
    parser.add_argument("--env", default="synthetic:cosine")
    parser.add_argument("--T", type=int, default=1000)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--m", type=int, default=100)
    parser.add_argument("--J", type=int, default=100)
    parser.add_argument("--K", type=int, default=4)
    parser.add_argument("--d-raw", dest="d_raw", type=int, default=4)
    parser.add_argument("--noise", type=float, default=0.1)
    parser.add_argument("--out", default="out/compare", help="output root; one subdir per agent")
    args = parser.parse_args()

    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    root = Path(args.out)

    print(f"{'algo':<12} {'mean final':>12} {'std':>10} {'mean s/trial':>13} {'failed':>7}")
    for algo in algos:
        config = ExperimentConfig(
            algo=algo, env=args.env, T=args.T, trials=args.trials, seed=args.seed,
            m=args.m, J=args.J, K=args.K, d_raw=args.d_raw, noise=args.noise,
            out=str(root / algo))
        rows = run_experiment(config)
        mean = next(r for r in rows if r.trial == "mean")
        std = next(r for r in rows if r.trial == "std")
        failed = sum(r.status != "ok" for r in rows)
        print(f"{algo:<12} {mean.final_cumulative_regret:>12.2f} "
              f"{std.final_cumulative_regret:>10.2f} "
              f"{mean.wall_time_seconds:>13.2f} {failed:>7d}")
    print(f"per-trial traces under {root}/")


if __name__ == "__main__":
    main()
