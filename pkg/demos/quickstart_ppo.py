"""Short on-policy run on procedural levels, train vs held-out returns."""

import argparse
from pathlib import Path

from stackaug.config import parse_config, write_config
from stackaug.train import run_training


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/quickstart-ppo")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=int, default=50000)
    args = ap.parse_args()

    # sparse unit rewards at toy scale: raw rewards, light entropy bonus,
    # sampled-policy evals
    cfg = parse_config(preset="desk", overrides={
        "algo": "ppo", "env": "chasegrid",
        "pipeline": "crop:48x48", "render_size": "56",
        "frame_stack": "1", "action_repeat": "1", "n_train_levels": "20",
        "eval_every": "10000", "eval_episodes": "5",
        "entropy_coef": "0.01", "reward_norm": "false", "greedy_eval": "false",
        "budget": str(args.budget), "seed": str(args.seed), "out": args.out,
    })
    run_dir = Path(cfg.out) / f"run-{cfg.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, run_dir / "config.cfg")

    summary = run_training(cfg, run_dir)
    for row in summary["evals"]:
        print(f"env_step {row['env_step']:>7d}  train {row['train']:6.3f}  "
              f"test {row['test']:6.3f}")
    print(f"final train {summary['final_train_return']:.3f}  "
          f"test {summary['final_test_return']:.3f}  artifacts in {run_dir}")


if __name__ == "__main__":
    main()
