"""Random search against Bayesian optimization on the hash table, from a poor starting table.

    python scripts/hashtable_rs_vs_bo.py --seeds 3 --budget 50 --out runs/hashtable.jsonl
    tunekit report --runs runs/hashtable.jsonl --format csv > trace.csv
"""

import argparse

from _common import run_grid
from tunekit.agent import Objective, OptimizerConfig
from tunekit.benchmarks import hashtable_spec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--n-keys", type=int, default=50_000)
    p.add_argument("--objective", default="probe_len", choices=["probe_len", "op_latency_ns", "collisions"])
    p.add_argument("--out", default="runs/hashtable.jsonl")
    args = p.parse_args()

    workload = {"name": f"zipf{args.n_keys}", "n_keys": args.n_keys, "key_dist": "zipf", "zipf_s": 1.1}
    optimizers = [OptimizerConfig(kind=k, seed=s, budget=args.budget) for s in range(args.seeds) for k in ("rs", "bo")]
    print(run_grid(args.out, "hashtable", hashtable_spec(), workload, Objective(args.objective), optimizers))


if __name__ == "__main__":
    main()
