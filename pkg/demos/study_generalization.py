"""Full generalization study: held-out level returns, crop vs no-aug.

Five seeds per arm at 500k env steps each; expect half an hour on one
core.  Finished runs under --out are reused on rerun.
"""

import argparse
import json

from stackaug.experiments import run_generalization


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/study-generalization")
    ap.add_argument("--budget", type=int, default=500000)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    args = ap.parse_args()

    seeds = tuple(int(s) for s in args.seeds.split(","))
    result = run_generalization(args.out, seeds=seeds, budget=args.budget)
    print(json.dumps({k: v for k, v in result.items() if k != "per_seed"}, indent=2))


if __name__ == "__main__":
    main()
