"""Train briefly, then dump spatial attention heatmaps for each conv layer."""

import argparse
from pathlib import Path

import numpy as np

from stackaug.analysis import heatmap_ppm, spatial_attention
from stackaug.config import parse_config, write_config
from stackaug.nn import Tensor, frozen
from stackaug.sac import obs_to_net
from stackaug.train import build_env, level_splits, net_input_hw, run_training, _fit_obs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/attention-probe")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=int, default=4000)
    args = ap.parse_args()

    cfg = parse_config(preset="desk", overrides={
        "algo": "sac", "env": "pointmass",
        "pipeline": "crop:48x48", "render_size": "56",
        "replay_capacity": "8000", "eval_every": "1000000", "eval_episodes": "2",
        "budget": str(args.budget), "seed": str(args.seed), "out": args.out,
    })
    run_dir = Path(cfg.out) / f"run-{cfg.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, run_dir / "config.cfg")
    summary = run_training(cfg, run_dir)
    print(f"trained to return {summary['final_eval_mean']:.2f}")

    from stackaug.train import build_agent, load_checkpoint

    agent = build_agent(cfg)
    load_checkpoint(agent, run_dir / "ckpt_final.ckpt")
    train_levels, _ = level_splits(cfg)
    obs = build_env(cfg, train_levels[0]).reset()
    x = obs_to_net(_fit_obs(obs, net_input_hw(cfg))[None])
    with frozen(agent.encoder):
        acts = agent.encoder.conv_activations(Tensor(x))
    for i, layer in enumerate(acts):
        amap = spatial_attention(layer.data[0])
        path = run_dir / f"attention_layer{i}.ppm"
        heatmap_ppm(amap, path, cell=16)
        y, xpos = np.unravel_index(np.argmax(amap), amap.shape)
        print(f"layer {i}: {amap.shape[0]}x{amap.shape[1]} peak at ({y},{xpos}) -> {path}")


if __name__ == "__main__":
    main()
