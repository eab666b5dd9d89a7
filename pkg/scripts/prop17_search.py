"""Randomized search for binary type III tables outside both decomposition pieces.

Samples positive tables satisfying 2 _||_ 4 | 1 and 1 _||_ {2,4} | 3 by cyclic
projection, then classifies each one. A table that passes the direct rank test
but lies in neither piece would be a counterexample.

    python scripts/prop17_search.py --n 100000 --seed 0
"""

import argparse
import json
import time

import numpy as np

from chaingraph import probes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--batch", type=int, default=2000)
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--max-sweeps", type=int, default=2000)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    counts = {"drawn": 0, "converged": 0, "piece_i": 0, "piece_ii": 0, "both": 0,
              "counterexamples": 0, "rank_disagreements": 0}
    t0 = time.time()
    while counts["drawn"] < args.n:
        m = min(args.batch, args.n - counts["drawn"])
        tables = probes.sample_type_iii(rng, m, tol=1e-10, max_sweeps=args.max_sweeps)
        counts["drawn"] += m
        counts["converged"] += len(tables)
        for p in tables:
            v = probes.membership_type_iii_binary(p, args.tol)
            d = v.detail
            counts["piece_i"] += d.cond_i
            counts["piece_ii"] += d.cond_ii
            counts["both"] += d.cond_i and d.cond_ii
            counts["counterexamples"] += v.direct and not v.prop17
            counts["rank_disagreements"] += not v.consistent
        print(f"{counts['drawn']:>7} drawn  {counts['counterexamples']} counterexamples"
              f"  {time.time() - t0:.0f}s", flush=True)
    counts["seconds"] = round(time.time() - t0, 1)
    print(json.dumps(counts, indent=2))


if __name__ == "__main__":
    main()
