"""Experiment configuration: typed fields, named presets, file + flag parsing.

The file format is line-oriented ``key = value`` with cosmetic ``[section]``
headers and ``#`` comments.  Keys live in one flat namespace; unknown keys are
rejected by name.  Precedence: defaults < preset < file < flag overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .augment import parse_pipeline
from .errors import ConfigError


@dataclass
class ExperimentConfig:
    # run
    algo: str = "sac"               # sac | ppo
    env: str = "pointmass"          # pointmass | chasegrid
    pipeline: str = ""              # augmentation stage grammar, empty = none
    seed: int = 0
    budget: int = 30000             # environment steps
    out: str = "runs"

    # env
    render_size: int = 48
    frame_stack: int = 3
    action_repeat: int = 4
    episode_steps: int = 100        # policy steps per episode
    n_train_levels: int = 10
    n_test_levels: int = 20
    split_seed: int = 1234

    # networks
    n_layers: int = 4
    filters: int = 32
    latent_dim: int = 50
    hidden: int = 1024
    encoder_strides: str = ""       # comma ints, empty = 2 then 1s

    # sac
    replay_capacity: int = 100000
    initial_steps: int = 1000
    batch_size: int = 128
    lr: float = 1e-3
    alpha_lr: float = 1e-4
    init_temp: float = 0.1
    gamma: float = 0.99
    tau_encoder: float = 0.05
    tau_q: float = 0.01
    target_update_freq: int = 2
    update_freq: int = 2            # policy steps between update calls
    twin_critic: bool = False

    # ppo
    rollout_len: int = 256
    n_envs: int = 16
    n_minibatches: int = 8
    n_epochs: int = 3
    clip_eps: float = 0.2
    entropy_coef: float = 0.1
    value_coef: float = 0.5
    lam: float = 0.95
    reward_norm: bool = True
    adv_norm: bool = True

    # eval
    eval_every: int = 5000          # env steps between eval checkpoints
    eval_episodes: int = 10
    greedy_eval: bool = True

    def strides(self):
        if not self.encoder_strides:
            return None
        try:
            return [int(x) for x in self.encoder_strides.split(",")]
        except ValueError:
            raise ConfigError(f"encoder_strides must be comma-separated ints, "
                              f"got {self.encoder_strides!r}")

    def parsed_pipeline(self):
        return parse_pipeline(self.pipeline) if self.pipeline else []

    def validate(self) -> "ExperimentConfig":
        if self.algo not in ("sac", "ppo"):
            raise ConfigError(f"algo must be sac or ppo, got {self.algo!r}")
        if self.env not in ("pointmass", "chasegrid"):
            raise ConfigError(f"env must be pointmass or chasegrid, got {self.env!r}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.budget < 0:
            raise ConfigError("budget must be nonnegative")
        for name in ("render_size", "frame_stack", "action_repeat", "episode_steps",
                     "n_train_levels", "n_test_levels", "n_layers", "filters",
                     "latent_dim", "hidden", "replay_capacity", "initial_steps",
                     "batch_size", "target_update_freq", "update_freq", "rollout_len",
                     "n_envs", "n_minibatches", "n_epochs", "eval_every", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError(f"clip_eps must lie in (0, 1), got {self.clip_eps}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must lie in [0, 1], got {self.lam}")
        if self.init_temp <= 0:
            raise ConfigError("init_temp must be positive")
        strides = self.strides()
        if strides is not None and len(strides) != self.n_layers:
            raise ConfigError(f"encoder_strides lists {len(strides)} entries "
                              f"for {self.n_layers} layers")
        self.parsed_pipeline()  # raises with a useful message on bad grammar
        return self


_SECTIONS = {
    "run": ["algo", "env", "pipeline", "seed", "budget", "out"],
    "env": ["render_size", "frame_stack", "action_repeat", "episode_steps",
            "n_train_levels", "n_test_levels", "split_seed"],
    "net": ["n_layers", "filters", "latent_dim", "hidden", "encoder_strides"],
    "sac": ["replay_capacity", "initial_steps", "batch_size", "lr", "alpha_lr",
            "init_temp", "gamma", "tau_encoder", "tau_q", "target_update_freq",
            "update_freq", "twin_critic"],
    "ppo": ["rollout_len", "n_envs", "n_minibatches", "n_epochs", "clip_eps",
            "entropy_coef", "value_coef", "lam", "reward_norm", "adv_norm"],
    "eval": ["eval_every", "eval_episodes", "greedy_eval"],
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


PRESETS = {
    # published table defaults for the continuous-control-from-pixels setting
    "pointmass-full": {
        "algo": "sac", "env": "pointmass", "pipeline": "crop:48x48",
        "render_size": 56, "frame_stack": 3, "action_repeat": 4,
        "replay_capacity": 100000, "initial_steps": 1000, "batch_size": 128,
        "lr": 1e-3, "alpha_lr": 1e-4, "init_temp": 0.1, "gamma": 0.99,
        "tau_encoder": 0.05, "tau_q": 0.01, "target_update_freq": 2,
        "n_layers": 4, "filters": 32, "latent_dim": 50, "hidden": 1024,
    },
    # published table defaults for the procedural-levels setting
    "chasegrid-full": {
        "algo": "ppo", "env": "chasegrid", "pipeline": "crop:48x48",
        "render_size": 56, "frame_stack": 1, "action_repeat": 1,
        "rollout_len": 256, "n_minibatches": 8, "n_epochs": 3, "n_envs": 16,
        "lr": 5e-4, "clip_eps": 0.2, "entropy_coef": 0.1, "lam": 0.95,
        "gamma": 0.99, "n_layers": 4, "filters": 32, "latent_dim": 50,
        "n_train_levels": 50,
    },
    # small everything: minutes, not hours, on one CPU core
    "desk": {
        "n_layers": 2, "filters": 12, "latent_dim": 32, "hidden": 64,
        "encoder_strides": "2,2", "batch_size": 32, "replay_capacity": 10000,
        "initial_steps": 1000, "update_freq": 2,
        "rollout_len": 64, "n_envs": 32, "n_minibatches": 8, "n_epochs": 1,
        "eval_every": 5000,
    },
}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key: {key}")
    t = _FIELD_TYPES[key]
    raw = raw.strip()
    if t in ("bool", bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} expects a boolean, got {raw!r}")
    try:
        if t in ("int", int):
            return int(raw)
        if t in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects a {t} value, got {raw!r}")
    return raw


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; sections are cosmetic, keys stay flat."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key}")
        values[key] = _coerce(key, raw)
    return values


def parse_config(path=None, preset=None, overrides=None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; "
                              f"choose from {', '.join(sorted(PRESETS))}")
        for k, v in PRESETS[preset].items():
            setattr(cfg, k, v)
    if path is not None:
        for k, v in parse_config_file(path).items():
            setattr(cfg, k, v)
    for k, raw in (overrides or {}).items():
        setattr(cfg, k, _coerce(k, str(raw)))
    return cfg.validate()


def write_config(cfg: ExperimentConfig, path):
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for k in keys:
            v = getattr(cfg, k)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{k} = {v}")
        lines.append("")
    Path(path).write_text("\n".join(lines))
