"""Short off-policy training run with random crops, desk-sized everything.

A few minutes on one core; prints the evaluation curve as it lands and
leaves the usual run artifacts behind.
"""

import argparse
from pathlib import Path

from stackaug.config import parse_config, write_config
from stackaug.train import run_training


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/quickstart-sac")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=int, default=10000)
    args = ap.parse_args()

    cfg = parse_config(preset="desk", overrides={
        "algo": "sac", "env": "pointmass",
        "pipeline": "crop:48x48", "render_size": "56",
        "replay_capacity": "8000", "eval_every": "2000", "eval_episodes": "5",
        "budget": str(args.budget), "seed": str(args.seed), "out": args.out,
    })
    run_dir = Path(cfg.out) / f"run-{cfg.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, run_dir / "config.cfg")

    summary = run_training(cfg, run_dir)
    for row in summary["evals"]:
        print(f"env_step {row['env_step']:>6d}  mean_return {row['mean']:8.2f}")
    print(f"final {summary['final_eval_mean']:.2f}  artifacts in {run_dir}")


if __name__ == "__main__":
    main()
