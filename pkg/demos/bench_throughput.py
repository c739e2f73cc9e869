"""Compare batched kernels against the per-frame reference loop."""

import argparse

from stackaug.analysis import run_bench
from stackaug.augment import parse_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kinds", default="crop:84x84,flip,grayscale,cutout,jitter")
    ap.add_argument("--b", type=int, default=128)
    ap.add_argument("--s", type=int, default=3)
    ap.add_argument("--hw", type=int, default=100, help="square frame side")
    ap.add_argument("--iterations", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--csv", help="optional CSV output path")
    args = ap.parse_args()

    report = run_bench(parse_pipeline(args.kinds), b=args.b, s=args.s,
                       h=args.hw, w=args.hw,
                       iterations=args.iterations, repeats=args.repeats)
    print(report.table())
    if args.csv:
        report.write_csv(args.csv)
        print(f"rows -> {args.csv}")


if __name__ == "__main__":
    main()
