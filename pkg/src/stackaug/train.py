"""Training loops, evaluation, checkpoints, and CSV logs for both agents.

One root seed fans out to every stochastic choice (agent init, level picks,
action noise, update draws, eval draws) through fixed derivation stages, so a
single integer reproduces a full run.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import nn
from .augment import out_shape
from .config import ExperimentConfig
from .envs import EnvWrapper, make_env, make_split
from .errors import ConfigError
from .ppo import PpoAgent, RewardNormalizer, RolloutBuffer, ppo_update
from .rng import RngStream
from .sac import ReplayBuffer, SacAgent, center_crop, sac_update

SAC_CSV_HEADER = ["env_step", "policy_step", "episode_return",
                  "critic_loss", "actor_loss", "alpha", "wall_ms"]
# value loss rides in the critic column, policy loss in the actor column,
# measured entropy in the temperature column
PPO_CSV_HEADER = SAC_CSV_HEADER + ["train_return", "test_return", "level_split_id"]

# root-seed derivation stages
_ST_AGENT = 10
_ST_LEVEL = 11
_ST_NOISE = 12
_ST_UPDATE = 13
_ST_EVAL = 14
_ST_INIT_ACT = 15
_ST_PPO_ACT = 16


def net_input_hw(cfg: ExperimentConfig) -> tuple[int, int]:
    """Spatial size the encoder sees: render size passed through the pipeline."""
    c = 3
    shape = (1, cfg.frame_stack, c, cfg.render_size, cfg.render_size)
    for kind in cfg.parsed_pipeline():
        shape = out_shape(kind, shape)
    return shape[3], shape[4]


def build_env(cfg: ExperimentConfig, level_seed: int) -> EnvWrapper:
    base = make_env(cfg.env, level_seed, render_size=cfg.render_size,
                    max_steps=cfg.episode_steps * cfg.action_repeat)
    return EnvWrapper(base, stack=cfg.frame_stack, action_repeat=cfg.action_repeat)


def level_splits(cfg: ExperimentConfig) -> tuple[list, list]:
    return make_split(cfg.n_train_levels, cfg.n_test_levels, cfg.split_seed)


def build_agent(cfg: ExperimentConfig):
    h, w = net_input_hw(cfg)
    obs_shape = (cfg.frame_stack, 3, h, w)
    agent_seed = RngStream(cfg.seed).fold(_ST_AGENT)
    if cfg.algo == "sac":
        if cfg.env != "pointmass":
            raise ConfigError("sac drives the continuous env (pointmass)")
        return SacAgent(obs_shape, action_dim=2, seed=agent_seed,
                        n_layers=cfg.n_layers, filters=cfg.filters,
                        strides=cfg.strides(), latent_dim=cfg.latent_dim,
                        hidden=cfg.hidden, lr=cfg.lr, alpha_lr=cfg.alpha_lr,
                        init_temp=cfg.init_temp, gamma=cfg.gamma,
                        tau_encoder=cfg.tau_encoder, tau_q=cfg.tau_q,
                        target_update_freq=cfg.target_update_freq,
                        twin_critic=cfg.twin_critic)
    if cfg.env != "chasegrid":
        raise ConfigError("ppo drives the discrete env (chasegrid)")
    return PpoAgent(obs_shape, n_actions=5, seed=agent_seed,
                    n_layers=cfg.n_layers, filters=cfg.filters,
                    strides=cfg.strides(), latent_dim=cfg.latent_dim,
                    lr=cfg.lr, clip_eps=cfg.clip_eps, entropy_coef=cfg.entropy_coef,
                    value_coef=cfg.value_coef, gamma=cfg.gamma, lam=cfg.lam,
                    n_epochs=cfg.n_epochs, n_minibatches=cfg.n_minibatches,
                    adv_norm=cfg.adv_norm)


def save_checkpoint(agent, path):
    nn.save_params(path, {k: t.data for k, t in agent.named_parameters().items()})


def load_checkpoint(agent, path):
    named = nn.load_params(path)
    params = agent.named_parameters()
    missing = sorted(set(params) - set(named))
    extra = sorted(set(named) - set(params))
    if missing or extra:
        raise ConfigError(f"checkpoint mismatch: missing={missing} extra={extra}")
    for k, t in params.items():
        if named[k].shape != t.data.shape:
            raise ConfigError(f"checkpoint {k}: shape {named[k].shape} vs {t.data.shape}")
        t.data = named[k].astype(t.data.dtype)


def _fit_obs(obs: np.ndarray, hw: tuple[int, int]) -> np.ndarray:
    """Deterministic center fit from stored render size to network size."""
    if obs.shape[-2:] == hw:
        return obs
    return center_crop(obs, *hw)


def eval_policy(cfg: ExperimentConfig, agent, levels, seed: int,
                episodes: int | None = None, greedy: bool | None = None):
    """Mean/std return over eval episodes, levels visited round-robin."""
    episodes = cfg.eval_episodes if episodes is None else episodes
    greedy = cfg.greedy_eval if greedy is None else greedy
    if not levels:
        raise ConfigError("eval needs at least one level")
    hw = net_input_hw(cfg)
    root = RngStream(seed)
    returns = []
    step_counter = 0
    for ep in range(episodes):
        env = build_env(cfg, levels[ep % len(levels)])
        obs = env.reset()
        total = 0.0
        done = False
        while not done:
            x = _fit_obs(obs, hw)
            if cfg.algo == "sac":
                noise = None if greedy else \
                    root.single(0, step_counter).normal(2)[0]
                action = agent.act(x, noise=noise)
            else:
                u = None if greedy else root.single(0, step_counter).uniform1()
                actions, _, _ = agent.act(x[None], u)
                action = int(actions[0])
            obs, reward, done = env.step(action)
            total += reward
            step_counter += 1
        returns.append(total)
    arr = np.asarray(returns, dtype=np.float64)
    return float(arr.mean()), float(arr.std()), returns


def eval_random_policy(cfg: ExperimentConfig, levels, seed: int,
                       episodes: int | None = None):
    """Uniform-random behavior on the same protocol; the floor baseline."""
    episodes = cfg.eval_episodes if episodes is None else episodes
    root = RngStream(seed)
    returns = []
    step_counter = 0
    for ep in range(episodes):
        env = build_env(cfg, levels[ep % len(levels)])
        env.reset()
        total = 0.0
        done = False
        while not done:
            ss = root.single(1, step_counter)
            if cfg.env == "chasegrid":
                action = int(ss.integers(5)[0])
            else:
                action = 2.0 * ss.uniform(2)[0] - 1.0
            _, reward, done = env.step(action)
            total += reward
            step_counter += 1
        returns.append(total)
    arr = np.asarray(returns, dtype=np.float64)
    return float(arr.mean()), float(arr.std()), returns


def _fmt(x) -> str:
    return "" if x is None else f"{x:.8g}"


def train_sac(cfg: ExperimentConfig, run_dir) -> dict:
    run_dir = Path(run_dir)
    root = RngStream(cfg.seed)
    train_levels, _ = level_splits(cfg)
    agent = build_agent(cfg)
    hw = net_input_hw(cfg)
    pipeline = cfg.parsed_pipeline()

    obs_shape = (cfg.frame_stack, 3, cfg.render_size, cfg.render_size)
    replay = ReplayBuffer(cfg.replay_capacity, obs_shape, action_dim=2,
                          initial_steps=cfg.initial_steps)

    t0 = time.perf_counter()
    log_path = run_dir / "train_log.csv"
    eval_path = run_dir / "eval_log.csv"
    metrics = {"critic_loss": None, "actor_loss": None, "alpha": None}
    eval_rows = []
    next_eval = cfg.eval_every
    episode_idx = 0
    policy_step = 0
    update_idx = 0
    env_steps = 0

    with open(log_path, "w", newline="") as log_fh, \
         open(eval_path, "w", newline="") as eval_fh:
        log = csv.writer(log_fh)
        log.writerow(SAC_CSV_HEADER)
        ev = csv.writer(eval_fh)
        ev.writerow(["env_step", "mean_return", "std_return"])

        env = build_env(cfg, train_levels[0])
        obs = env.reset()
        ep_return = 0.0

        while env_steps < cfg.budget:
            if policy_step < cfg.initial_steps:
                action = 2.0 * root.single(_ST_INIT_ACT, policy_step).uniform(2)[0] - 1.0
            else:
                noise = root.single(_ST_NOISE, policy_step).normal(2)[0]
                action = agent.act(_fit_obs(obs, hw), noise=noise)
            next_obs, reward, done = env.step(action)
            replay.add(obs, action, reward, next_obs, done)
            obs = next_obs
            ep_return += reward
            policy_step += 1
            env_steps += cfg.action_repeat

            if replay.ready and policy_step % cfg.update_freq == 0:
                metrics = sac_update(agent, replay, pipeline,
                                     seed=root.fold(_ST_UPDATE), update_index=update_idx,
                                     batch_size=cfg.batch_size, crop_to=None)
                update_idx += 1

            if done:
                wall_ms = (time.perf_counter() - t0) * 1e3
                log.writerow([env_steps, policy_step, _fmt(ep_return),
                              _fmt(metrics["critic_loss"]), _fmt(metrics["actor_loss"]),
                              _fmt(metrics["alpha"]), f"{wall_ms:.1f}"])
                episode_idx += 1
                level = train_levels[root.single(_ST_LEVEL, episode_idx).integers(
                    len(train_levels))[0]]
                env = build_env(cfg, level)
                obs = env.reset()
                ep_return = 0.0

            if env_steps >= next_eval and env_steps < cfg.budget:
                mean, std, _ = eval_policy(cfg, agent, train_levels,
                                           seed=root.fold(_ST_EVAL, next_eval))
                ev.writerow([env_steps, _fmt(mean), _fmt(std)])
                eval_rows.append({"env_step": env_steps, "mean": mean, "std": std})
                next_eval += cfg.eval_every

        save_checkpoint(agent, run_dir / "ckpt_final.ckpt")
        final_mean, final_std, _ = (eval_policy(cfg, agent, train_levels,
                                                seed=root.fold(_ST_EVAL, cfg.budget + 1))
                                    if cfg.budget > 0 else (None, None, []))
        if final_mean is not None:
            ev.writerow([env_steps, _fmt(final_mean), _fmt(final_std)])
            eval_rows.append({"env_step": env_steps, "mean": final_mean, "std": final_std})

    summary = {
        "algo": "sac", "seed": cfg.seed, "env_steps": env_steps,
        "policy_steps": policy_step, "episodes": episode_idx,
        "updates": update_idx, "final_eval_mean": final_mean,
        "final_eval_std": final_std, "evals": eval_rows,
    }
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def train_ppo(cfg: ExperimentConfig, run_dir) -> dict:
    run_dir = Path(run_dir)
    root = RngStream(cfg.seed)
    train_levels, test_levels = level_splits(cfg)
    agent = build_agent(cfg)
    hw = net_input_hw(cfg)
    pipeline = cfg.parsed_pipeline()

    obs_shape = (cfg.frame_stack, 3, cfg.render_size, cfg.render_size)
    normalizer = RewardNormalizer(cfg.n_envs, gamma=cfg.gamma) if cfg.reward_norm else None

    t0 = time.perf_counter()
    log_path = run_dir / "train_log.csv"
    reset_counter = 0
    global_step = 0
    env_steps = 0
    rollout_idx = 0
    next_eval = cfg.eval_every
    last_train_eval = None
    last_test_eval = None
    eval_rows = []
    completed: list[float] = []

    def fresh_env():
        nonlocal reset_counter
        level = train_levels[root.single(_ST_LEVEL, reset_counter).integers(
            len(train_levels))[0]]
        reset_counter += 1
        return build_env(cfg, level)

    with open(log_path, "w", newline="") as log_fh:
        log = csv.writer(log_fh)
        log.writerow(PPO_CSV_HEADER)

        envs = [fresh_env() for _ in range(cfg.n_envs)]
        obs = np.stack([e.reset() for e in envs], axis=0)
        ep_returns = np.zeros(cfg.n_envs, dtype=np.float64)

        while env_steps < cfg.budget:
            rollout = RolloutBuffer(cfg.rollout_len, cfg.n_envs, obs_shape)
            rollout_done: list[float] = []
            for t in range(cfg.rollout_len):
                u = root.single(_ST_PPO_ACT, global_step).uniform(cfg.n_envs)[0]
                actions, log_probs, values = agent.act(_fit_obs(obs, hw), u)
                rewards = np.zeros(cfg.n_envs)
                dones = np.zeros(cfg.n_envs)
                next_obs = np.empty_like(obs)
                for i, env in enumerate(envs):
                    o, r, d = env.step(int(actions[i]))
                    rewards[i] = r
                    dones[i] = float(d)
                    ep_returns[i] += r
                    if d:
                        rollout_done.append(ep_returns[i])
                        ep_returns[i] = 0.0
                        envs[i] = fresh_env()
                        o = envs[i].reset()
                    next_obs[i] = o
                stored = normalizer.update(rewards, dones) if normalizer else rewards
                rollout.add_step(t, obs, actions, log_probs, stored, dones, values)
                obs = next_obs
                global_step += 1
                env_steps += cfg.n_envs * cfg.action_repeat
            _, _, boot_values = agent.act(_fit_obs(obs, hw), None)
            rollout.set_bootstrap(boot_values)

            metrics = ppo_update(agent, rollout, pipeline,
                                 seed=root.fold(_ST_UPDATE, rollout_idx))
            rollout_idx += 1
            completed.extend(rollout_done)

            if env_steps >= next_eval:
                mean_tr, _, _ = eval_policy(cfg, agent, train_levels,
                                            seed=root.fold(_ST_EVAL, next_eval))
                mean_te, _, _ = eval_policy(cfg, agent, test_levels,
                                            seed=root.fold(_ST_EVAL, next_eval + 1))
                last_train_eval, last_test_eval = mean_tr, mean_te
                eval_rows.append({"env_step": env_steps, "train": mean_tr, "test": mean_te})
                while next_eval <= env_steps:
                    next_eval += cfg.eval_every

            wall_ms = (time.perf_counter() - t0) * 1e3
            ep_mean = float(np.mean(rollout_done)) if rollout_done else None
            log.writerow([env_steps, global_step, _fmt(ep_mean),
                          _fmt(metrics["value_loss"]), _fmt(metrics["policy_loss"]),
                          _fmt(metrics["entropy"]), f"{wall_ms:.1f}",
                          _fmt(last_train_eval), _fmt(last_test_eval), cfg.split_seed])

        save_checkpoint(agent, run_dir / "ckpt_final.ckpt")
        if cfg.budget > 0:
            final_train, _, _ = eval_policy(cfg, agent, train_levels,
                                            seed=root.fold(_ST_EVAL, cfg.budget + 1))
            final_test, final_test_std, _ = eval_policy(
                cfg, agent, test_levels, seed=root.fold(_ST_EVAL, cfg.budget + 2))
        else:
            final_train = final_test = final_test_std = None

    summary = {
        "algo": "ppo", "seed": cfg.seed, "env_steps": env_steps,
        "rollouts": rollout_idx, "episodes": len(completed),
        "final_train_return": final_train, "final_test_return": final_test,
        "final_test_std": final_test_std, "level_split_id": cfg.split_seed,
        "evals": eval_rows,
    }
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_training(cfg: ExperimentConfig, run_dir) -> dict:
    if cfg.algo == "sac":
        return train_sac(cfg, run_dir)
    return train_ppo(cfg, run_dir)
