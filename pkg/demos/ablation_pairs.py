"""Tiny ordered-pair ablation: every (first, second) augmentation combo.

Each cell trains a fresh desk-sized agent for --budget env steps, so the
full grid over k kinds costs (k+1)^2 short runs.  Defaults finish in a
few minutes and write ablation.csv plus a heatmap PPM.
"""

import argparse
import copy
from pathlib import Path

from stackaug.analysis import ablation_grid
from stackaug.augment import format_pipeline, parse_pipeline
from stackaug.config import parse_config, write_config
from stackaug.train import run_training


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kinds", default="flip,grayscale")
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=int, default=2000)
    args = ap.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = parse_config(preset="desk", overrides={
        "algo": "sac", "env": "pointmass", "render_size": "56",
        "replay_capacity": "8000", "initial_steps": "200",
        "eval_every": "1000000", "eval_episodes": "5",
        "budget": str(args.budget), "seed": str(args.seed),
    })

    cell = [0]

    def train_fn(pipeline):
        cfg = copy.deepcopy(base)
        cfg.pipeline = format_pipeline(pipeline)
        cfg.out = str(out_dir / f"cell{cell[0]:02d}")
        cell[0] += 1
        cfg.validate()
        run_dir = Path(cfg.out) / f"run-{cfg.seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_config(cfg, run_dir / "config.cfg")
        summary = run_training(cfg, run_dir)
        print(f"  {cfg.pipeline or 'identity':24s} -> {summary['final_eval_mean']:.2f}")
        return summary["final_eval_mean"]

    grid, names = ablation_grid(parse_pipeline(args.kinds), train_fn,
                                out_csv=out_dir / "ablation.csv",
                                out_ppm=out_dir / "ablation.ppm")
    print(f"grid over {names}:")
    print(grid)


if __name__ == "__main__":
    main()
