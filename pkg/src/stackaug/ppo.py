"""Clipped-ratio policy optimization with GAE and the augmentation hook.

Rollout observations are augmented once per rollout with one draw per
environment trajectory, shared by every timestep of that trajectory.  The
trajectory axis is packed onto the stack axis of a PixelBatch, so the
stack-consistency contract of the augmentation stage provides the sharing.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .augment import run_pipeline
from .errors import ConfigError, NumericsError
from .imagecore import PixelBatch
from .nn import Adam, CategoricalHead, ConvEncoder, Linear, Tensor, frozen
from .rng import RngStream
from .sac import center_crop, obs_to_net

_ST_AUG = 0
_ST_SHUFFLE = 1  # epoch e shuffles with element index e


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        gamma: float, lam: float):
    """Generalized advantage estimation over a (T, N) rollout.

    ``values`` carries T+1 rows, the last being the bootstrap value of the
    state after the rollout.  A terminal flag at step t cuts bootstrapping
    through both the one-step residual and the recursion.
    Returns (advantages, returns), both (T, N) float64.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    t_len, n_env = rewards.shape
    if values.shape != (t_len + 1, n_env):
        raise ConfigError(f"values must be (T+1, N) = {(t_len + 1, n_env)}, got {values.shape}")
    if dones.shape != rewards.shape:
        raise ConfigError("dones and rewards must agree in shape")
    adv = np.zeros_like(rewards)
    carry = np.zeros(n_env, dtype=np.float64)
    for t in range(t_len - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * live * values[t + 1] - values[t]
        carry = delta + gamma * lam * live * carry
        adv[t] = carry
    return adv, adv + values[:-1]


def ppo_policy_loss(log_prob_new: Tensor, log_prob_old: np.ndarray,
                    advantages: np.ndarray, eps: float) -> Tensor:
    """mean of -min(rho A, clip(rho, 1-eps, 1+eps) A), rho the density ratio.

    Old log-probs and advantages enter as constants; only the new log-probs
    carry gradient.
    """
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"clip range must lie in (0, 1), got {eps}")
    old = Tensor(np.asarray(log_prob_old, dtype=log_prob_new.data.dtype))
    adv = Tensor(np.asarray(advantages, dtype=log_prob_new.data.dtype))
    ratio = nn.exp(log_prob_new - old)
    surr = nn.minimum(ratio * adv, nn.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)
    return -nn.tmean(surr)


def ppo_value_loss(values: Tensor, returns: np.ndarray) -> Tensor:
    """Plain mean squared error against the return targets."""
    target = Tensor(np.asarray(returns, dtype=values.data.dtype))
    return nn.tmean(nn.square(values - target))


class RewardNormalizer:
    """Scale rewards by a running std of the discounted return.

    Tracks a per-env discounted return R_t = gamma (1-done) R_{t-1} + r_t and
    a running variance of all R values seen; rewards are divided by that std
    and clipped to +-clip.
    """

    def __init__(self, n_envs: int, gamma: float = 0.99, clip: float = 10.0):
        self.gamma = gamma
        self.clip = clip
        self.ret = np.zeros(n_envs, dtype=np.float64)
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, rewards: np.ndarray, dones: np.ndarray) -> np.ndarray:
        rewards = np.asarray(rewards, dtype=np.float64)
        self.ret = self.gamma * self.ret + rewards
        ret_seen = self.ret.copy()
        # an episode's carry ends at its terminal step, after the last reward
        self.ret[np.asarray(dones, dtype=bool)] = 0.0
        for v in ret_seen:
            self.count += 1
            d = v - self.mean
            self.mean += d / self.count
            self.m2 += d * (v - self.mean)
        std = np.sqrt(self.m2 / self.count) if self.count > 1 else 1.0
        return np.clip(rewards / (std + 1e-8), -self.clip, self.clip)


class RolloutBuffer:
    """T x N on-policy storage; must be full before the update consumes it."""

    def __init__(self, t_len: int, n_envs: int, obs_shape):
        self.t_len = t_len
        self.n_envs = n_envs
        s, c, h, w = obs_shape
        self.obs = np.zeros((t_len, n_envs, s, c, h, w), dtype=np.uint8)
        self.actions = np.zeros((t_len, n_envs), dtype=np.int64)
        self.log_probs = np.zeros((t_len, n_envs), dtype=np.float64)
        self.rewards = np.zeros((t_len, n_envs), dtype=np.float64)
        self.dones = np.zeros((t_len, n_envs), dtype=np.float64)
        self.values = np.zeros((t_len + 1, n_envs), dtype=np.float64)
        self._filled = 0

    def add_step(self, t: int, obs, actions, log_probs, rewards, dones, values):
        if t != self._filled:
            raise ConfigError(f"rollout steps must arrive in order, expected {self._filled} got {t}")
        if not np.all(np.isfinite(rewards)):
            raise NumericsError("non-finite reward in rollout")
        self.obs[t] = obs
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.rewards[t] = rewards
        self.dones[t] = dones
        self.values[t] = values
        self._filled += 1

    def set_bootstrap(self, values):
        if self._filled != self.t_len:
            raise ConfigError("bootstrap value set before the rollout is full")
        self.values[self.t_len] = values

    @property
    def full(self) -> bool:
        return self._filled == self.t_len


class PpoAgent:
    """Shared conv encoder with categorical policy and value heads."""

    def __init__(self, obs_shape, n_actions: int, seed: int, n_layers: int = 4,
                 filters: int = 32, strides=None, latent_dim: int = 50,
                 lr: float = 5e-4, clip_eps: float = 0.2, entropy_coef: float = 0.1,
                 value_coef: float = 0.5, gamma: float = 0.99, lam: float = 0.95,
                 n_epochs: int = 3, n_minibatches: int = 8, adv_norm: bool = True):
        if not 0.0 < clip_eps < 1.0:
            raise ConfigError(f"clip range must lie in (0, 1), got {clip_eps}")
        s, c, h, w = obs_shape
        self.obs_shape = tuple(obs_shape)
        self.n_actions = n_actions
        self.clip_eps = clip_eps
        self.entropy_coef = entropy_coef
        self.value_coef = value_coef
        self.gamma = gamma
        self.lam = lam
        self.n_epochs = n_epochs
        self.n_minibatches = n_minibatches
        self.adv_norm = adv_norm

        root = RngStream(seed)
        self.encoder = ConvEncoder((s * c, h, w), n_layers=n_layers, filters=filters,
                                   strides=strides, latent_dim=latent_dim, rng=root.single(0))
        self.policy_head = CategoricalHead(latent_dim, n_actions, root.single(1))
        self.value_head = Linear(latent_dim, 1, root.single(2))
        params = (self.encoder.parameters() + self.policy_head.parameters()
                  + self.value_head.parameters())
        self.opt = Adam(params, lr=lr)

    def forward(self, obs_net: np.ndarray):
        """(B, S*C, H, W) floats -> (log_probs (B, n_actions), values (B,))."""
        latent = self.encoder(Tensor(obs_net))
        log_probs = self.policy_head.log_probs(latent)
        values = nn.reshape(self.value_head(latent), (-1,))
        return log_probs, values

    def act(self, obs: np.ndarray, uniforms: np.ndarray | None = None):
        """Act on a batch of observations without building a graph.

        ``uniforms`` in [0,1) pick actions by inverse CDF; None means greedy.
        Returns (actions (B,), log_probs (B,), values (B,)) as numpy.
        """
        x = obs_to_net(obs)
        with frozen(self.encoder, self.policy_head, self.value_head):
            log_probs, values = self.forward(x)
        lp = log_probs.data.astype(np.float64)
        probs = np.exp(lp)
        if uniforms is None:
            actions = np.argmax(lp, axis=1)
        else:
            cum = np.cumsum(probs, axis=1)
            cum[:, -1] = 1.0  # guard the float tail
            actions = np.argmax(cum > np.asarray(uniforms)[:, None], axis=1)
        chosen = lp[np.arange(lp.shape[0]), actions]
        return actions, chosen, values.data.astype(np.float64)

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        out.update(self.encoder.named_parameters("encoder."))
        out.update(self.policy_head.named_parameters("policy."))
        out.update(self.value_head.named_parameters("value."))
        return out


def augment_rollout_obs(obs: np.ndarray, pipeline, seed: int) -> np.ndarray:
    """Augment (T, N, S, C, H, W) bytes with one draw per env trajectory.

    Packing (T, S) onto the stack axis of a PixelBatch of B = N elements makes
    the per-element consistency guarantee span the whole trajectory.
    """
    t_len, n_env, s, c, h, w = obs.shape
    packed = np.ascontiguousarray(obs.transpose(1, 0, 2, 3, 4, 5)).reshape(n_env, t_len * s, c, h, w)
    out = run_pipeline(PixelBatch(packed), pipeline, seed=seed).data
    oh, ow = out.shape[-2:]
    return np.ascontiguousarray(
        out.reshape(n_env, t_len, s, c, oh, ow).transpose(1, 0, 2, 3, 4, 5))


def ppo_update(agent: PpoAgent, rollout: RolloutBuffer, pipeline, seed: int) -> dict:
    """Consume one full rollout: augment, estimate advantages, epoch updates."""
    if not rollout.full:
        raise ConfigError("ppo_update requires a full rollout")
    stream = RngStream(seed)

    obs = rollout.obs
    if pipeline:
        obs = augment_rollout_obs(obs, pipeline, seed=stream.fold(_ST_AUG))
    if obs.shape[-2:] != agent.obs_shape[-2:]:
        obs = center_crop(obs, *agent.obs_shape[-2:])

    adv, rets = gae(rollout.rewards, rollout.values, rollout.dones, agent.gamma, agent.lam)

    t_len, n_env = rollout.rewards.shape
    flat_obs = obs.reshape((t_len * n_env,) + obs.shape[2:])
    flat_actions = rollout.actions.reshape(-1)
    flat_old_lp = rollout.log_probs.reshape(-1)
    flat_adv = adv.reshape(-1)
    flat_rets = rets.reshape(-1)

    n = t_len * n_env
    if n % agent.n_minibatches:
        raise ConfigError(
            f"rollout size {n} not divisible into {agent.n_minibatches} minibatches")
    mb = n // agent.n_minibatches

    totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0}
    n_batches = 0
    for epoch in range(agent.n_epochs):
        order = np.argsort(stream.substream(_ST_SHUFFLE + epoch, n).uniform1(), kind="stable")
        for k in range(agent.n_minibatches):
            idx = order[k * mb : (k + 1) * mb]
            batch_adv = flat_adv[idx]
            if agent.adv_norm:
                batch_adv = (batch_adv - batch_adv.mean()) / (batch_adv.std() + 1e-8)

            log_probs, values = agent.forward(obs_to_net(flat_obs[idx]))
            lp_new = nn.gather_rows(log_probs, flat_actions[idx])
            p_loss = ppo_policy_loss(lp_new, flat_old_lp[idx], batch_adv, agent.clip_eps)
            v_loss = ppo_value_loss(values, flat_rets[idx])
            entropy = nn.tmean(agent.policy_head.entropy(log_probs))
            loss = p_loss + agent.value_coef * v_loss - agent.entropy_coef * entropy
            if not np.isfinite(loss.data):
                raise NumericsError("update loss diverged")

            agent.opt.zero_grad()
            loss.backward()
            agent.opt.step()

            totals["policy_loss"] += float(p_loss.data)
            totals["value_loss"] += float(v_loss.data)
            totals["entropy"] += float(entropy.data)
            n_batches += 1

    return {k: v / n_batches for k, v in totals.items()}
