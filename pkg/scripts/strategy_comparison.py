"""All-at-once against one-at-a-time tuning, for both optimizers, on a synthetic surface."""

import argparse

from _common import run_grid
from tunekit.agent import Objective, OptimizerConfig
from tunekit.benchmarks import synthetic_spec
from tunekit.optimizer import ALL_AT_ONCE, ONE_AT_A_TIME


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--function", default="jagged", choices=["jagged", "separable", "quadratic"])
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--budget", type=int, default=40)
    p.add_argument("--slice", type=int, default=10)
    p.add_argument("--out", default="runs/strategies.jsonl")
    args = p.parse_args()

    direction = "maximize" if args.function == "jagged" else "minimize"
    optimizers = [
        OptimizerConfig(kind=k, seed=s, budget=args.budget, strategy=st, slice=args.slice)
        for s in range(args.seeds)
        for k in ("rs", "bo")
        for st in (ALL_AT_ONCE, ONE_AT_A_TIME)
    ]
    workload = {"name": args.function, "function": args.function}
    print(run_grid(args.out, "synthetic", synthetic_spec(args.dim), workload, Objective("value", direction), optimizers))


if __name__ == "__main__":
    main()
