"""Two-arm studies: data efficiency (off-policy) and generalization (on-policy).

Each study trains a padded-render crop arm against a no-augmentation arm over
several seeds with everything else held fixed, then reduces the per-seed final
evaluations to arm means and decision statistics.  Runs land under
``<out>/<arm>/run-<seed>/`` with the usual artifacts; the study summary is
written to ``<out>/summary.json``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import stats

from .config import parse_config, write_config
from .train import eval_random_policy, level_splits, run_training

# arm -> config deltas; the crop arm renders padded frames and crops down,
# the control renders at the network size directly so both nets see 48x48
SAC_ARMS = {
    "crop": {"pipeline": "crop:48x48", "render_size": "56"},
    "noaug": {"pipeline": "", "render_size": "48"},
}
PPO_ARMS = SAC_ARMS


def _run_arm(algo, env, arm_overrides, seed, budget, out_dir, extra, reuse):
    run_dir = Path(out_dir) / f"run-{seed}"
    summary_path = run_dir / "summary.json"
    if reuse and summary_path.exists():
        return json.loads(summary_path.read_text())
    run_dir.mkdir(parents=True, exist_ok=True)
    overrides = {"algo": algo, "env": env, "seed": str(seed),
                 "budget": str(budget), "out": str(out_dir)}
    overrides.update(arm_overrides)
    overrides.update(extra or {})
    cfg = parse_config(preset="desk", overrides=overrides)
    write_config(cfg, run_dir / "config.cfg")
    return run_training(cfg, run_dir)


def run_data_efficiency(out_dir, seeds=(0, 1, 2), budget=30000,
                        extra_overrides=None, reuse=True) -> dict:
    """Off-policy study on the continuous env: crop arm vs no-aug vs random.

    The random baseline replays the evaluation protocol with uniform actions.
    Returns arm means of the final evaluation plus per-seed detail.
    """
    out_dir = Path(out_dir)
    # update every policy step with a clipped double critic and a wider
    # batch: the small desk nets are seed-sensitive below this setting
    extra = {"replay_capacity": "8000", "eval_episodes": "10",
             "eval_every": "5000", "update_freq": "1",
             "twin_critic": "true", "batch_size": "64"}
    extra.update(extra_overrides or {})

    finals = {}
    for arm, deltas in SAC_ARMS.items():
        finals[arm] = []
        for seed in seeds:
            s = _run_arm("sac", "pointmass", deltas, seed, budget,
                         out_dir / arm, extra, reuse)
            finals[arm].append(s["final_eval_mean"])

    # random-action baseline under the same evaluation protocol
    base_cfg = parse_config(preset="desk", overrides={
        "algo": "sac", "env": "pointmass", **SAC_ARMS["crop"], **extra,
        "budget": str(budget)})
    train_levels, _ = level_splits(base_cfg)
    random_returns = []
    for seed in seeds:
        mean, _, _ = eval_random_policy(base_cfg, train_levels, seed=seed)
        random_returns.append(mean)

    crop_mean = float(np.mean(finals["crop"]))
    noaug_mean = float(np.mean(finals["noaug"]))
    random_mean = float(np.mean(random_returns))
    # "twice as good as random" reads directly for positive returns; for the
    # cost-style negative returns here it means at most half the cost.
    # The raw inequality crop >= 2*random is kept as a secondary floor.
    if random_mean >= 0:
        beats_random = crop_mean >= 2.0 * random_mean
    else:
        beats_random = crop_mean >= 0.5 * random_mean

    result = {
        "study": "data_efficiency",
        "budget": budget,
        "seeds": list(seeds),
        "per_seed": finals,
        "random_per_seed": random_returns,
        "crop_mean": crop_mean,
        "noaug_mean": noaug_mean,
        "random_mean": random_mean,
        "crop_beats_random_2x": bool(beats_random),
        "beats_random_literal": bool(crop_mean >= 2.0 * random_mean),
        "crop_ge_noaug": bool(crop_mean >= noaug_mean),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(json.dumps(result, indent=2))
    return result


def run_generalization(out_dir, seeds=(0, 1, 2, 3, 4), budget=500000,
                       extra_overrides=None, reuse=True) -> dict:
    """On-policy study on procedural levels: held-out test return by arm.

    Uses a one-sided Welch test (crop > no-aug) over per-seed final test
    returns and reports the absolute margin between arm means.
    """
    out_dir = Path(out_dir)
    # sparse unit rewards at this scale need the raw reward signal (no
    # running normalizer), a light entropy bonus, and the sampled policy at
    # eval time; 30 episodes per eval keep the per-seed test means steady
    extra = {"frame_stack": "1", "action_repeat": "1", "n_train_levels": "50",
             "eval_every": "100000", "eval_episodes": "30",
             "entropy_coef": "0.01", "reward_norm": "false",
             "greedy_eval": "false"}
    extra.update(extra_overrides or {})

    finals = {arm: {"train": [], "test": []} for arm in PPO_ARMS}
    for arm, deltas in PPO_ARMS.items():
        for seed in seeds:
            s = _run_arm("ppo", "chasegrid", deltas, seed, budget,
                         out_dir / arm, extra, reuse)
            finals[arm]["train"].append(s["final_train_return"])
            finals[arm]["test"].append(s["final_test_return"])

    crop = np.asarray(finals["crop"]["test"], dtype=np.float64)
    noaug = np.asarray(finals["noaug"]["test"], dtype=np.float64)
    welch = stats.ttest_ind(crop, noaug, equal_var=False, alternative="greater")

    result = {
        "study": "generalization",
        "budget": budget,
        "seeds": list(seeds),
        "per_seed": finals,
        "crop_test_mean": float(crop.mean()),
        "noaug_test_mean": float(noaug.mean()),
        "crop_train_mean": float(np.mean(finals["crop"]["train"])),
        "noaug_train_mean": float(np.mean(finals["noaug"]["train"])),
        "margin": float(crop.mean() - noaug.mean()),
        "welch_t": float(welch.statistic),
        "welch_p": float(welch.pvalue),
        "significant": bool(welch.pvalue < 0.05),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(json.dumps(result, indent=2))
    return result
