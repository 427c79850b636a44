"""Grid sweep of max_spin over the contention family; prints the throughput-maximizing spin per workload.

Needs several hardware threads to mean anything.  On fewer than 4 the
numbers are printed but flagged as low fidelity.
"""

import argparse
import json
import statistics

import numpy as np

from tunekit.benchmarks.spinlock import ContentionWorkload, SpinlockConfig, hardware_parallelism, spinlock_run, workload_family


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-log2", type=int, default=16)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--duration-ms", type=int, default=100)
    p.add_argument("--csv", help="also write every measurement here")
    args = p.parse_args()

    if hardware_parallelism() < 4:
        print(f"warning: {hardware_parallelism()} hardware thread(s); contention results are low fidelity")
    grid = [1 << i for i in range(args.max_log2 + 1)]
    rows, best = [], {}
    for w in workload_family(ContentionWorkload(duration_ms=args.duration_ms)):
        winners = []
        for rep in range(args.reps):
            tput = []
            for spin in grid:
                r, _ = spinlock_run(SpinlockConfig(max_spin=spin), w, seed=rep)
                tput.append(r.throughput_ops_s)
                rows.append((w.k, rep, spin, r.throughput_ops_s, r.p99_acquire_ns, r.backoff_events))
            winners.append(grid[int(np.argmax(tput))])
        best[w.k] = statistics.median(winners)
        print(f"k={w.k} heavy_ops={w.heavy_ops}: argmax max_spin per rep {winners} -> median {best[w.k]}", flush=True)
    print(json.dumps({"argmax_max_spin": best}))
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("k,rep,max_spin,throughput_ops_s,p99_acquire_ns,backoff_events\n")
            f.writelines(",".join(map(str, row)) + "\n" for row in rows)


if __name__ == "__main__":
    main()
