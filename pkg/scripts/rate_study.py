"""Hausdorff distance between climbing polylines and gradient lines, over several starts.

    python3 scripts/rate_study.py --fixture D_mix2 --algorithm alg2 --starts 10 --out rates.csv
"""
import argparse
import csv

import numpy as np

from modalflow import RateExperimentError, rate_experiment_alg1, rate_experiment_alg2
from modalflow.experiments import random_interior_starts
from modalflow.fixtures import get_fixture

DEFAULT_STEPS = {"alg1": [4e-3, 2e-3, 1e-3, 5e-4], "alg2": [4e-2, 2e-2, 1e-2, 5e-3]}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--fixture", default="D_mix2")
    p.add_argument("--algorithm", choices=["alg1", "alg2"], default="alg2")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=float, nargs="+", default=None)
    p.add_argument("--out", default="rate_study.csv")
    args = p.parse_args()

    fx = get_fixture(args.fixture)
    c = fx.controls()
    steps = args.steps or DEFAULT_STEPS[args.algorithm]
    run = rate_experiment_alg1 if args.algorithm == "alg1" else rate_experiment_alg2
    starts = random_interior_starts(fx.model, c, args.starts, args.seed).points
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"coord_{i}" for i in range(fx.model.dim)] + ["slope", "two_point_slope", "floor_saturated"]
                   + [f"dist_{s:g}" for s in steps])
        slopes = []
        for x in starts:
            try:
                rep = run(fx.model, x, steps, c)
            except RateExperimentError as exc:
                print(f"start {x.tolist()}: {exc}")
                continue
            slopes.append(rep.slope)
            w.writerow([repr(float(v)) for v in x] + [rep.slope, rep.two_point_slope, rep.floor_saturated]
                       + [repr(float(d)) for d in rep.distances])
            print(f"start {np.round(x, 4).tolist()}: slope {rep.slope:.4f}", flush=True)
    if slopes:
        print(f"median slope {np.median(slopes):.4f} over {len(slopes)} starts")


if __name__ == "__main__":
    main()
