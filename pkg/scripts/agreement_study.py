"""Fraction of random interior starts where each climb returns the gradient-flow mode.

    python3 scripts/agreement_study.py --fixtures D_mix1 D_mix2 --starts 200 --out agreement.json
"""
import argparse
import json
import time

from modalflow.experiments import climb_agreement, random_interior_starts
from modalflow.fixtures import FIXTURES, get_fixture


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--fixtures", nargs="+", choices=sorted(FIXTURES), default=["D_mix1", "D_mix2"])
    p.add_argument("--starts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta-rel-fmax", type=float, default=1e-3)
    p.add_argument("--eps-rel-diam", type=float, default=1e-2)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="agreement.json")
    args = p.parse_args()

    report = {}
    for name in args.fixtures:
        fx = get_fixture(name)
        c = fx.controls()
        starts = random_interior_starts(fx.model, c, args.starts, args.seed)
        report[name] = {"rejected_candidates": starts.rejected}
        for alg, step in (("alg1", args.eta_rel_fmax * c.fmax), ("alg2", args.eps_rel_diam * c.diameter)):
            t0 = time.perf_counter()
            summary = climb_agreement(fx.model, c, starts, alg, step, seed=args.seed, workers=args.workers)
            report[name][alg] = {**summary.to_dict(), "seconds": round(time.perf_counter() - t0, 1)}
            print(name, alg, report[name][alg], flush=True)
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
