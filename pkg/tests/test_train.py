"""Training loops and CLI plumbing on miniature budgets."""

import csv
import json

import numpy as np
import pytest

from stackaug.cli import main
from stackaug.config import parse_config
from stackaug.errors import ConfigError
from stackaug.train import (
    PPO_CSV_HEADER,
    SAC_CSV_HEADER,
    build_agent,
    eval_policy,
    eval_random_policy,
    level_splits,
    load_checkpoint,
    net_input_hw,
    run_training,
    save_checkpoint,
)


def sac_cfg(tmp_path, **extra):
    over = {
        "algo": "sac", "env": "pointmass", "pipeline": "crop:48x48",
        "render_size": "56", "budget": "200", "initial_steps": "20",
        "episode_steps": "10", "eval_every": "120", "eval_episodes": "1",
        "batch_size": "16", "replay_capacity": "500",
        "n_train_levels": "3", "n_test_levels": "2",
        "out": str(tmp_path), "seed": "5",
    }
    over.update({k: str(v) for k, v in extra.items()})
    return parse_config(preset="desk", overrides=over)


def ppo_cfg(tmp_path, **extra):
    over = {
        "algo": "ppo", "env": "chasegrid", "pipeline": "crop:48x48",
        "render_size": "56", "frame_stack": "1", "action_repeat": "1",
        "budget": "32", "rollout_len": "8", "n_envs": "2",
        "n_minibatches": "2", "n_epochs": "1",
        "episode_steps": "10", "eval_every": "1000", "eval_episodes": "1",
        "n_train_levels": "3", "n_test_levels": "2",
        "out": str(tmp_path), "seed": "5",
    }
    over.update({k: str(v) for k, v in extra.items()})
    return parse_config(preset="desk", overrides=over)


def run_into(cfg, tmp_path, name):
    run_dir = tmp_path / name
    run_dir.mkdir(parents=True)
    summary = run_training(cfg, run_dir)
    return run_dir, summary


def rows_without_wall(path):
    """CSV rows with the wall-clock column dropped; timing is never replayable."""
    with open(path) as fh:
        rows = list(csv.reader(fh))
    idx = rows[0].index("wall_ms")
    return [[c for j, c in enumerate(r) if j != idx] for r in rows]


# ------------------------------------------------------------------ zero budget

def test_budget_zero_emits_config_and_empty_log(tmp_path):
    rc = main(["train-sac", "--preset", "desk", "--env", "pointmass",
               "--pipeline", "crop:48x48", "--set", "render_size=56",
               "--budget", "0", "--seed", "3", "--out", str(tmp_path / "o")])
    assert rc == 0
    run_dir = tmp_path / "o" / "run-3"
    assert (run_dir / "config.cfg").exists()
    assert (run_dir / "ckpt_final.ckpt").exists()
    with open(run_dir / "train_log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows == [SAC_CSV_HEADER]
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["env_steps"] == 0


# ---------------------------------------------------------------- determinism

def test_sac_rerun_identical_metrics(tmp_path):
    d1, s1 = run_into(sac_cfg(tmp_path), tmp_path, "a")
    d2, s2 = run_into(sac_cfg(tmp_path), tmp_path, "b")
    assert rows_without_wall(d1 / "train_log.csv") == rows_without_wall(d2 / "train_log.csv")
    assert (d1 / "eval_log.csv").read_text() == (d2 / "eval_log.csv").read_text()
    assert s1["final_eval_mean"] == s2["final_eval_mean"]
    assert len(rows_without_wall(d1 / "train_log.csv")) > 1


def test_sac_seed_changes_metrics(tmp_path):
    d1, _ = run_into(sac_cfg(tmp_path), tmp_path, "a")
    d2, _ = run_into(sac_cfg(tmp_path, seed=6), tmp_path, "b")
    assert rows_without_wall(d1 / "train_log.csv") != rows_without_wall(d2 / "train_log.csv")


def test_ppo_rerun_identical_metrics(tmp_path):
    d1, s1 = run_into(ppo_cfg(tmp_path), tmp_path, "a")
    d2, s2 = run_into(ppo_cfg(tmp_path), tmp_path, "b")
    assert rows_without_wall(d1 / "train_log.csv") == rows_without_wall(d2 / "train_log.csv")
    assert s1["final_test_return"] == s2["final_test_return"]
    with open(d1 / "train_log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == PPO_CSV_HEADER
    assert len(rows) == 3  # two rollouts


def test_ppo_seed_changes_metrics(tmp_path):
    d1, _ = run_into(ppo_cfg(tmp_path), tmp_path, "a")
    d2, _ = run_into(ppo_cfg(tmp_path, seed=6), tmp_path, "b")
    assert rows_without_wall(d1 / "train_log.csv") != rows_without_wall(d2 / "train_log.csv")


def test_sac_no_aug_runs(tmp_path):
    cfg = sac_cfg(tmp_path, pipeline="", render_size=48)
    d, s = run_into(cfg, tmp_path, "a")
    assert s["env_steps"] == 200
    assert s["updates"] > 0


# -------------------------------------------------------------- agents, evals

def test_build_agent_pairing(tmp_path):
    with pytest.raises(ConfigError):
        build_agent(parse_config(overrides={"algo": "sac", "env": "chasegrid"}))
    with pytest.raises(ConfigError):
        build_agent(parse_config(overrides={"algo": "ppo", "env": "pointmass"}))


def test_net_input_hw_follows_pipeline():
    cfg = parse_config(overrides={"pipeline": "crop:40x40", "render_size": "56"})
    assert net_input_hw(cfg) == (40, 40)
    cfg = parse_config(overrides={"pipeline": "", "render_size": "48"})
    assert net_input_hw(cfg) == (48, 48)


def test_level_splits_disjoint():
    cfg = parse_config(overrides={"n_train_levels": "8", "n_test_levels": "5"})
    train, test = level_splits(cfg)
    assert len(train) == 8 and len(test) == 5
    assert not set(train) & set(test)


def test_eval_policy_deterministic(tmp_path):
    cfg = sac_cfg(tmp_path, budget=0)
    agent = build_agent(cfg)
    _, test_levels = level_splits(cfg)
    a = eval_policy(cfg, agent, test_levels, seed=4, episodes=2)
    b = eval_policy(cfg, agent, test_levels, seed=4, episodes=2)
    assert a[0] == b[0] and a[2] == b[2]
    # greedy rollouts do not consume the eval seed
    c = eval_policy(cfg, agent, test_levels, seed=5, episodes=2)
    assert a[0] == c[0]
    d = eval_policy(cfg, agent, test_levels, seed=4, episodes=2, greedy=False)
    e = eval_policy(cfg, agent, test_levels, seed=5, episodes=2, greedy=False)
    assert d[0] != e[0]


def test_eval_random_policy_both_envs(tmp_path):
    cfg = sac_cfg(tmp_path, budget=0)
    _, test_levels = level_splits(cfg)
    mean, std, rets = eval_random_policy(cfg, test_levels, seed=2, episodes=2)
    assert np.isfinite(mean) and len(rets) == 2
    cfg = ppo_cfg(tmp_path)
    _, test_levels = level_splits(cfg)
    mean, _, rets = eval_random_policy(cfg, test_levels, seed=2, episodes=2)
    assert np.isfinite(mean) and len(rets) == 2


def test_checkpoint_roundtrip(tmp_path):
    cfg = sac_cfg(tmp_path, budget=0)
    agent = build_agent(cfg)
    path = tmp_path / "ck.ckpt"
    save_checkpoint(agent, path)
    other = build_agent(sac_cfg(tmp_path, budget=0, seed=99))
    load_checkpoint(other, path)
    obs = np.full((3, 3, 48, 48), 90, dtype=np.uint8)
    a1 = agent.act(obs)
    a2 = other.act(obs)
    assert np.array_equal(a1, a2)


def test_checkpoint_shape_mismatch(tmp_path):
    cfg = sac_cfg(tmp_path, budget=0)
    agent = build_agent(cfg)
    path = tmp_path / "ck.ckpt"
    save_checkpoint(agent, path)
    other = build_agent(sac_cfg(tmp_path, budget=0, latent_dim=16))
    with pytest.raises(ConfigError):
        load_checkpoint(other, path)


# ------------------------------------------------------------------------ cli

def test_cli_rerun_requires_force(tmp_path):
    args = ["train-sac", "--preset", "desk", "--env", "pointmass",
            "--pipeline", "crop:48x48", "--set", "render_size=56",
            "--budget", "0", "--seed", "3", "--out", str(tmp_path / "o")]
    assert main(args) == 0
    assert main(args) == 2
    assert main(args + ["--force"]) == 0


def test_cli_bad_set_flag(tmp_path):
    rc = main(["train-sac", "--budget", "0", "--out", str(tmp_path),
               "--set", "oops"])
    assert rc == 2


def test_cli_unknown_key_exit_two(tmp_path):
    rc = main(["train-sac", "--budget", "0", "--out", str(tmp_path),
               "--set", "learnig_rate=3"])
    assert rc == 2


def test_cli_eval_guards_train_levels(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["train-sac", "--preset", "desk", "--env", "pointmass",
                 "--pipeline", "crop:48x48", "--set", "render_size=56",
                 "--set", "n_train_levels=2", "--set", "n_test_levels=2",
                 "--budget", "0", "--seed", "3", "--out", str(out)]) == 0
    run = str(out / "run-3")
    assert main(["eval", "--run", run, "--level-set", "train",
                 "--episodes", "1"]) == 2
    assert main(["eval", "--run", run, "--level-set", "train",
                 "--episodes", "1", "--allow-train"]) == 0
    assert main(["eval", "--run", run, "--episodes", "1"]) == 0
    msg = capsys.readouterr()
    assert "mean_return=" in msg.out


def test_cli_eval_missing_run(tmp_path):
    assert main(["eval", "--run", str(tmp_path / "nope")]) == 2


def test_cli_augment_missing_file(tmp_path):
    rc = main(["augment", "--in", str(tmp_path / "no.batch"),
               "--out", str(tmp_path / "o.batch")])
    assert rc == 2
