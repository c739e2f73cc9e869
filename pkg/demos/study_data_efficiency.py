"""Full data-efficiency study: crop arm vs no-aug vs random baseline.

Three seeds per arm at 30k env steps each; about ten minutes on one core.
Already-finished runs under --out are reused, so the study resumes cleanly.
"""

import argparse
import json

from stackaug.experiments import run_data_efficiency


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/study-data-efficiency")
    ap.add_argument("--budget", type=int, default=30000)
    ap.add_argument("--seeds", default="0,1,2")
    args = ap.parse_args()

    seeds = tuple(int(s) for s in args.seeds.split(","))
    result = run_data_efficiency(args.out, seeds=seeds, budget=args.budget)
    print(json.dumps({k: v for k, v in result.items() if k != "per_seed"}, indent=2))


if __name__ == "__main__":
    main()
