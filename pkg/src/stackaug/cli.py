"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

import numpy as np

from . import nn
from .analysis import ablation_grid, heatmap_ppm, preview, run_bench, spatial_attention
from .augment import PIPELINE_GRAMMAR, format_pipeline, parse_pipeline, run_pipeline
from .config import ExperimentConfig, PRESETS, parse_config, write_config
from .errors import ConfigError, NumericsError
from .imagecore import read_batch, write_batch
from .nn import Tensor, frozen
from .rng import RngStream
from .train import (
    build_agent,
    build_env,
    eval_policy,
    level_splits,
    load_checkpoint,
    net_input_hw,
    run_training,
    _fit_obs,
)


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="config file (key = value lines)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named preset applied first")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--budget", type=int, help="environment-step budget")
    p.add_argument("--out", help="output directory")
    p.add_argument("--env", help="environment name")
    p.add_argument("--pipeline", help="augmentation pipeline string")
    p.add_argument("--force", action="store_true",
                   help="allow writing into a run directory that has artifacts")


def _gather_config(args, algo=None) -> ExperimentConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, _, v = item.partition("=")
        overrides[k.strip()] = v.strip()
    for key in ("seed", "budget", "out", "env", "pipeline"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = str(val)
    if algo is not None:
        overrides["algo"] = algo
    return parse_config(path=args.config, preset=args.preset, overrides=overrides)


def _prepare_run_dir(cfg: ExperimentConfig, force: bool) -> Path:
    run_dir = Path(cfg.out) / f"run-{cfg.seed}"
    if run_dir.exists() and any(run_dir.iterdir()) and not force:
        raise ConfigError(f"{run_dir} already holds artifacts; pass --force to rerun")
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, run_dir / "config.cfg")
    return run_dir


# ------------------------------------------------------------- subcommands

def cmd_augment(args) -> int:
    if args.print_grammar:
        print(PIPELINE_GRAMMAR)
        return 0
    if not args.input or not args.output:
        raise ConfigError("augment needs --in and --out (or --print-grammar)")
    batch = read_batch(args.input)
    pipeline = parse_pipeline(args.pipeline) if args.pipeline else []
    out = run_pipeline(batch, pipeline, seed=args.seed, workers=args.workers)
    write_batch(args.output, out)
    print(f"wrote {args.output} shape={out.shape}")
    return 0


def cmd_preview(args) -> int:
    batch = read_batch(args.input)
    pipeline = parse_pipeline(args.pipeline) if args.pipeline else []
    paths = preview(batch, pipeline, seed=args.seed, out_dir=args.out)
    print(f"wrote {len(paths)} frames to {args.out}")
    return 0


def cmd_bench(args) -> int:
    kinds = parse_pipeline(args.kinds)
    report = run_bench(kinds, b=args.b, s=args.s, c=args.c, h=args.height, w=args.width,
                       iterations=args.iterations, repeats=args.repeats,
                       workers=args.workers)
    if args.csv:
        report.write_csv(args.csv)
    if args.json:
        print(report.to_json())
    else:
        print(report.table())
    return 0


def cmd_train(args, algo: str) -> int:
    cfg = _gather_config(args, algo=algo)
    run_dir = _prepare_run_dir(cfg, args.force)
    summary = run_training(cfg, run_dir)
    keys = ("final_eval_mean",) if algo == "sac" else \
        ("final_train_return", "final_test_return")
    parts = [f"env_steps={summary['env_steps']}"]
    for k in keys:
        v = summary.get(k)
        parts.append(f"{k}={v if v is None else f'{v:.4f}'}")
    print(f"run {run_dir}: " + " ".join(parts))
    return 0


def cmd_eval(args) -> int:
    run_dir = Path(args.run)
    cfg_path = run_dir / "config.cfg"
    ckpt_path = Path(args.ckpt) if args.ckpt else run_dir / "ckpt_final.ckpt"
    if not cfg_path.exists():
        raise ConfigError(f"no config.cfg under {run_dir}")
    if not ckpt_path.exists():
        raise ConfigError(f"no checkpoint at {ckpt_path}")
    cfg = parse_config(path=cfg_path)
    agent = build_agent(cfg)
    load_checkpoint(agent, ckpt_path)

    train_levels, test_levels = level_splits(cfg)
    if args.levels:
        levels = [int(x) for x in args.levels.split(",")]
    elif args.level_set == "train":
        levels = train_levels
    else:
        levels = test_levels
    overlap = set(levels) & set(train_levels)
    if overlap and not args.allow_train:
        raise ConfigError(
            f"{len(overlap)} requested level(s) belong to the training split; "
            f"pass --allow-train to evaluate on them")

    mean, std, returns = eval_policy(cfg, agent, levels, seed=args.seed,
                                     episodes=args.episodes,
                                     greedy=not args.stochastic)
    print(f"episodes={len(returns)} mean_return={mean:.6g} std_return={std:.6g}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _gather_config(args, algo="sac")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = parse_pipeline(args.kinds)

    cell = [0]

    def train_fn(pipeline) -> float:
        sub = copy.deepcopy(cfg)
        sub.pipeline = format_pipeline(pipeline)
        sub.out = str(out_dir / f"cell{cell[0]:02d}")
        cell[0] += 1
        sub.validate()
        run_dir = _prepare_run_dir(sub, args.force)
        summary = run_training(sub, run_dir)
        value = summary.get("final_eval_mean")
        return float(value) if value is not None else 0.0

    grid, names = ablation_grid(kinds, train_fn,
                                out_csv=out_dir / "ablation.csv",
                                out_ppm=out_dir / "ablation.ppm")
    print(f"ablation grid {grid.shape[0]}x{grid.shape[1]} over {', '.join(names)}")
    print(f"wrote {out_dir / 'ablation.csv'} and {out_dir / 'ablation.ppm'}")
    return 0


def cmd_attention(args) -> int:
    run_dir = Path(args.run)
    cfg = parse_config(path=run_dir / "config.cfg")
    agent = build_agent(cfg)
    load_checkpoint(agent, run_dir / "ckpt_final.ckpt")

    if args.input:
        batch = read_batch(args.input)
        obs = batch.data[args.element]
    else:
        train_levels, _ = level_splits(cfg)
        env = build_env(cfg, train_levels[args.element % len(train_levels)])
        obs = env.reset()
    x = _fit_obs(obs, net_input_hw(cfg))
    from .sac import obs_to_net

    with frozen(agent.encoder):
        acts = agent.encoder.conv_activations(Tensor(obs_to_net(x[None])))
    try:
        layer = acts[args.layer]
    except IndexError:
        raise ConfigError(f"--layer {args.layer} out of range for "
                          f"{len(acts)} conv layers")
    amap = spatial_attention(layer.data[0])
    heatmap_ppm(amap, args.out, cell=args.cell)
    y, x_pos = np.unravel_index(np.argmax(amap), amap.shape)
    print(f"wrote {args.out} map={amap.shape[0]}x{amap.shape[1]} argmax=({y},{x_pos})")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stackaug",
                                description="stacked-frame augmentation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("augment", help="apply a pipeline to a batch file")
    a.add_argument("--in", dest="input", help="input batch file")
    a.add_argument("--out", dest="output", help="output batch file")
    a.add_argument("--pipeline", default="", help="stage grammar string")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--print-grammar", action="store_true",
                   help="print the pipeline grammar and exit")
    a.set_defaults(fn=cmd_augment)

    pv = sub.add_parser("preview", help="write augmented frames as PPM files")
    pv.add_argument("--in", dest="input", required=True, help="input batch file")
    pv.add_argument("--out", required=True, help="output directory")
    pv.add_argument("--pipeline", default="")
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(fn=cmd_preview)

    b = sub.add_parser("bench", help="time batched kernels against the naive loop")
    b.add_argument("--kinds", default="crop:84x84,grayscale,cutout,cutout-color,"
                                      "flip,rotate,conv,jitter")
    b.add_argument("--b", type=int, default=128)
    b.add_argument("--s", type=int, default=3)
    b.add_argument("--c", type=int, default=3)
    b.add_argument("--height", type=int, default=100)
    b.add_argument("--width", type=int, default=100)
    b.add_argument("--iterations", type=int, default=10)
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--csv", help="also write rows to this CSV path")
    b.add_argument("--json", action="store_true", help="print a JSON report")
    b.set_defaults(fn=cmd_bench)

    ts = sub.add_parser("train-sac", help="train the off-policy agent")
    _add_config_flags(ts)
    ts.set_defaults(fn=lambda a: cmd_train(a, "sac"))

    tp = sub.add_parser("train-ppo", help="train the on-policy agent")
    _add_config_flags(tp)
    tp.set_defaults(fn=lambda a: cmd_train(a, "ppo"))

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a level set")
    ev.add_argument("--run", required=True, help="run directory (config + checkpoint)")
    ev.add_argument("--ckpt", help="checkpoint path (default <run>/ckpt_final.ckpt)")
    ev.add_argument("--level-set", choices=["train", "test"], default="test")
    ev.add_argument("--levels", help="explicit comma-separated level seeds")
    ev.add_argument("--episodes", type=int, default=None)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--stochastic", action="store_true",
                    help="sample actions instead of greedy/mean")
    ev.add_argument("--allow-train", action="store_true",
                    help="permit levels from the training split")
    ev.set_defaults(fn=cmd_eval)

    ab = sub.add_parser("ablate", help="train every ordered pair of augmentations")
    _add_config_flags(ab)
    ab.add_argument("--kinds", default="flip,grayscale",
                    help="kinds forming the grid axes (pipeline grammar)")
    ab.set_defaults(fn=cmd_ablate)

    at = sub.add_parser("attention", help="spatial attention map of a checkpoint")
    at.add_argument("--run", required=True, help="run directory (config + checkpoint)")
    at.add_argument("--in", dest="input", help="batch file to probe (default: env reset)")
    at.add_argument("--element", type=int, default=0)
    at.add_argument("--layer", type=int, default=-1,
                    help="conv layer index feeding the map (default: final)")
    at.add_argument("--out", default="attention.ppm")
    at.add_argument("--cell", type=int, default=16, help="heatmap cell size in pixels")
    at.set_defaults(fn=cmd_attention)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
