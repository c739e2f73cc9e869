"""Render every augmentation kind against the same synthetic batch.

Writes one PPM per element/frame into --out, grouped by kind, so the
stack-consistency and per-element variation are visible side by side.
"""

import argparse
from pathlib import Path

import numpy as np

from stackaug.analysis import preview
from stackaug.augment import parse_pipeline
from stackaug.imagecore import PixelBatch


def checker_batch(b=3, s=2, h=64, w=64):
    # checkerboard plus a per-element diagonal stripe; structure makes
    # crops, flips and rotations easy to tell apart by eye
    y, x = np.mgrid[0:h, 0:w]
    board = ((y // 8 + x // 8) % 2) * 180 + 40
    data = np.zeros((b, s, 3, h, w), dtype=np.uint8)
    for i in range(b):
        stripe = (np.abs(y - x - 8 * i) < 4) * 255
        frame = np.stack([board, stripe, np.flipud(board)], axis=0)
        for j in range(s):
            data[i, j] = np.roll(frame, shift=3 * j, axis=2)  # frames drift rightward
    return PixelBatch(data)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="gallery")
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args()

    batch = checker_batch()
    specs = ["", "crop:48x48", "grayscale", "cutout", "cutout-color", "flip",
             "rotate", "conv", "jitter", "crop:48x48,jitter"]
    for spec in specs:
        name = spec.replace(":", "_").replace(",", "+") or "identity"
        out_dir = Path(args.out) / name
        paths = preview(batch, parse_pipeline(spec) if spec else [],
                        seed=args.seed, out_dir=out_dir)
        print(f"{name:24s} {len(paths)} frames -> {out_dir}")


if __name__ == "__main__":
    main()
