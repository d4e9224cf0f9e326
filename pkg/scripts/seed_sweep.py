#!/usr/bin/env python3
"""Directional benchmark comparisons across several seeds.

Prints, per seed, the F-vs-J and F-vs-confidence mean gaps from the
benchmark study so the default-seed result can be put in context.
"""

import argparse

import numpy as np

from toolselect.experiments import run_benchmark


def means(records, objective, metric):
    return float(np.mean([getattr(r, metric) for r in records if r.objective == objective and r.valid]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--toolset-size", type=int, default=10)
    args = ap.parse_args()

    print("seed  logdet(F-J)  |derr|(F-J)  err(F-conf)")
    for seed in args.seeds:
        recs = run_benchmark(args.trials, args.toolset_size, seed=seed).records
        print(
            f"{seed:4d}  {means(recs, 'F', 'logdet') - means(recs, 'J', 'logdet'):11.3f}"
            f"  {means(recs, 'F', 'abs_delta_error') - means(recs, 'J', 'abs_delta_error'):11.3f}"
            f"  {means(recs, 'F', 'task_error') - means(recs, 'confidence', 'task_error'):11.3f}"
        )


if __name__ == "__main__":
    main()
