"""Soft actor-critic from pixels with the augmentation hook.

Observations sampled from replay are augmented (stochastic across the batch,
consistent across each element's frame stack) before they reach the critic
and actor losses.  An empty pipeline is bitwise-identical to the plain no
augmentation code path, which keeps the baseline comparison honest.

Loss functions are duck-typed against a small agent protocol (encoder,
q_heads, target forwards, actor, alpha) so tests can drive them with
hand-built stubs.
"""

from __future__ import annotations

import math

import numpy as np

from . import nn
from .augment import run_pipeline
from .errors import ConfigError, NumericsError
from .imagecore import PixelBatch
from .nn import Adam, ConvEncoder, GaussianTanhHead, MLP, Tensor, concat, frozen, square, tmean
from .rng import RngStream

# stage that derives one child seed per update, then purpose stages within it
_ST_UPDATE_ROOT = 7
_ST_MINIBATCH = 0
_ST_AUG_OBS = 1
_ST_AUG_NEXT = 2
_ST_ACTOR_NOISE = 3
_ST_TARGET_NOISE = 4


class ReplayBuffer:
    """Uniform ring buffer of pixel transitions, preallocated byte storage."""

    def __init__(self, capacity: int, obs_shape, action_dim: int, initial_steps: int = 1000):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = capacity
        self.initial_steps = initial_steps
        s, c, h, w = obs_shape
        self.obs = np.zeros((capacity, s, c, h, w), dtype=np.uint8)
        self.next_obs = np.zeros((capacity, s, c, h, w), dtype=np.uint8)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self._head = 0

    def add(self, obs, action, reward, next_obs, done):
        if not np.isfinite(reward):
            raise NumericsError(f"non-finite reward {reward}")
        i = self._head
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.dones[i] = float(done)
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    @property
    def ready(self) -> bool:
        return self.size >= self.initial_steps

    def sample_indices(self, stream) -> np.ndarray:
        """Uniform indices, one per stream element; no hidden RNG state."""
        if not self.ready:
            raise ConfigError(
                f"replay has {self.size} transitions, sampling opens at {self.initial_steps}"
            )
        return stream.integers(self.size)


def center_crop(obs: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Deterministic center window on (..., H, W); acting-time view."""
    h, w = obs.shape[-2], obs.shape[-1]
    if out_h > h or out_w > w:
        raise ConfigError(f"center crop {out_h}x{out_w} exceeds input {h}x{w}")
    dy, dx = (h - out_h) // 2, (w - out_w) // 2
    return obs[..., dy : dy + out_h, dx : dx + out_w]


def obs_to_net(obs: np.ndarray) -> np.ndarray:
    """(B,S,C,H,W) bytes -> (B, S*C, H, W) float32 in [0,1]."""
    b, s, c, h, w = obs.shape
    return (obs.reshape(b, s * c, h, w).astype(np.float32)) / np.float32(255.0)


class SacAgent:
    """Networks, targets, temperature, and optimizers for pixel SAC.

    The conv encoder belongs to the critic: critic gradients train it, the
    actor reads detached latents.  Target networks are EMA copies with
    separate time constants for the encoder and the Q head.
    """

    def __init__(self, obs_shape, action_dim: int, seed: int, n_layers: int = 4,
                 filters: int = 32, strides=None, latent_dim: int = 50, hidden: int = 1024,
                 lr: float = 1e-3, alpha_lr: float = 1e-4, init_temp: float = 0.1,
                 gamma: float = 0.99, tau_encoder: float = 0.05, tau_q: float = 0.01,
                 target_update_freq: int = 2, twin_critic: bool = False):
        s, c, h, w = obs_shape
        self.obs_shape = tuple(obs_shape)
        self.action_dim = action_dim
        self.gamma = gamma
        self.tau_encoder = tau_encoder
        self.tau_q = tau_q
        self.target_update_freq = target_update_freq
        self.twin_critic = twin_critic
        self.target_entropy = -float(action_dim)

        root = RngStream(seed)
        enc_rng = root.single(stage=0)
        q_rng = root.single(stage=1)
        actor_rng = root.single(stage=2)

        in_shape = (s * c, h, w)
        self.encoder = ConvEncoder(in_shape, n_layers=n_layers, filters=filters,
                                   strides=strides, latent_dim=latent_dim, rng=enc_rng)
        q_in = latent_dim + action_dim
        self.q_heads = [MLP(q_in, [hidden, hidden], 1, q_rng)]
        if twin_critic:
            self.q_heads.append(MLP(q_in, [hidden, hidden], 1, q_rng))
        self.actor_trunk = MLP(latent_dim, hidden, hidden, actor_rng)
        self.actor_head = GaussianTanhHead(hidden, action_dim, actor_rng)

        self.target_encoder = ConvEncoder(in_shape, n_layers=n_layers, filters=filters,
                                          strides=strides, latent_dim=latent_dim, rng=enc_rng)
        self.target_q_heads = [MLP(q_in, [hidden, hidden], 1, q_rng) for _ in self.q_heads]
        self._sync_targets()

        self.log_alpha = nn.Tensor(np.array([math.log(init_temp)], dtype=np.float32),
                                   requires_grad=True)
        self.log_alpha.is_param = True

        critic_params = self.encoder.parameters() + [p for qh in self.q_heads for p in qh.parameters()]
        actor_params = self.actor_trunk.parameters() + self.actor_head.parameters()
        self.critic_opt = Adam(critic_params, lr=lr)
        self.actor_opt = Adam(actor_params, lr=lr)
        self.alpha_opt = Adam([self.log_alpha], lr=alpha_lr, betas=(0.5, 0.999))
        self.updates_done = 0

    def _sync_targets(self):
        for t, o in zip(self.target_encoder.parameters(), self.encoder.parameters()):
            t.data = o.data.copy()
            t.requires_grad = False
        for tq, oq in zip(self.target_q_heads, self.q_heads):
            for t, o in zip(tq.parameters(), oq.parameters()):
                t.data = o.data.copy()
                t.requires_grad = False

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data[0]))

    # ---------------------------------------------------------------- acting

    def policy_sample(self, latent: Tensor, noise: np.ndarray):
        return self.actor_head.sample(self.actor_trunk_forward(latent), noise)

    def actor_trunk_forward(self, latent: Tensor) -> Tensor:
        return nn.relu(self.actor_trunk(latent))

    def act(self, obs: np.ndarray, noise: np.ndarray | None = None) -> np.ndarray:
        """One observation (S,C,H,W) -> action; greedy mean when noise is None."""
        x = Tensor(obs_to_net(obs[None]))
        with frozen(self.encoder, self.actor_trunk, self.actor_head):
            latent = self.encoder(x)
            h = self.actor_trunk_forward(latent)
            if noise is None:
                a = self.actor_head.mean_action(h)
            else:
                a, _ = self.actor_head.sample(h, noise.reshape(1, -1))
        return a.data[0].astype(np.float64)

    def q_forward(self, latent: Tensor, action: Tensor, target: bool = False) -> list[Tensor]:
        heads = self.target_q_heads if target else self.q_heads
        x = concat([latent, action], axis=1)
        return [nn.reshape(qh(x), (-1,)) for qh in heads]

    # ------------------------------------------------------------ parameters

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        out.update(self.encoder.named_parameters("encoder."))
        for i, qh in enumerate(self.q_heads):
            out.update(qh.named_parameters(f"q{i}."))
        out.update(self.target_encoder.named_parameters("target_encoder."))
        for i, qh in enumerate(self.target_q_heads):
            out.update(qh.named_parameters(f"target_q{i}."))
        out.update(self.actor_trunk.named_parameters("actor_trunk."))
        out.update(self.actor_head.named_parameters("actor_head."))
        out["log_alpha"] = self.log_alpha
        return out


# --------------------------------------------------------------------- losses

def _modules_of(agent, *names) -> list:
    """Collect real Module attributes; stub agents may carry plain callables."""
    out = []
    for name in names:
        m = getattr(agent, name, None)
        if isinstance(m, nn.Module):
            out.append(m)
        elif isinstance(m, (list, tuple)):
            out.extend(x for x in m if isinstance(x, nn.Module))
    return out


def target_value(agent, next_obs_net: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """V(o') = Q_target(o', a') - alpha * log pi(a'|o'), a' sampled fresh.

    Computed with every parameter frozen: the result is a plain constant
    vector, so no gradient can ever leak through the bootstrap target.
    """
    x = Tensor(next_obs_net)
    modules = _modules_of(agent, "encoder", "target_encoder", "actor_trunk", "actor_head",
                          "q_heads", "target_q_heads")
    with frozen(*modules):
        online_latent = agent.encoder(x)
        a_next, logp = agent.policy_sample(online_latent, noise)
        target_latent = agent.target_encoder(x)
        qs = agent.q_forward(target_latent, a_next, target=True)
        q = qs[0] if len(qs) == 1 else nn.minimum(qs[0], qs[1])
    return q.data - agent.alpha * logp.data


def critic_loss(agent, obs_net: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared Bellman residual; targets enter as constants."""
    latent = agent.encoder(Tensor(obs_net))
    qs = agent.q_forward(latent, Tensor(actions))
    y = Tensor(targets.astype(obs_net.dtype))
    loss = tmean(square(qs[0] - y))
    for extra in qs[1:]:
        loss = loss + tmean(square(extra - y))
    return loss, qs


def actor_loss(agent, obs_net: np.ndarray, noise: np.ndarray):
    """mean(alpha * log pi - Q) with critic frozen and latents detached."""
    with frozen(*_modules_of(agent, "encoder")):
        # forward under frozen params builds no graph: the latent is a leaf,
        # so the actor step cannot train the encoder
        latent = agent.encoder(Tensor(obs_net))
    a, logp = agent.policy_sample(latent, noise)
    with frozen(*_modules_of(agent, "encoder", "q_heads")):
        qs = agent.q_forward(latent, a)
    q = qs[0] if len(qs) == 1 else nn.minimum(qs[0], qs[1])
    loss = tmean(agent.alpha * logp - q)
    return loss, logp


def alpha_loss(agent, logp_const: np.ndarray):
    """mean(-alpha * (log pi + target entropy)); log pi is a constant here."""
    alpha_t = nn.exp(agent.log_alpha)
    coef = float(np.mean(logp_const) + agent.target_entropy)
    return alpha_t * (-coef)


def compute_bellman_targets(agent, rewards, dones, next_obs_net, noise) -> np.ndarray:
    v_next = target_value(agent, next_obs_net, noise)
    return rewards + agent.gamma * (1.0 - dones) * v_next


def sac_update(agent, replay: ReplayBuffer, pipeline, seed: int, update_index: int,
               batch_size: int = 128, crop_to: tuple[int, int] | None = None) -> dict:
    """One critic step, one actor step, one temperature step.

    ``pipeline`` empty or None selects the plain path: both feed the network
    the same bytes, so the two are bitwise-identical on a frozen buffer.
    ``crop_to`` applies a deterministic center crop when no pipeline stage
    reshapes the stored observations to the network input size.
    """
    stream = RngStream(RngStream(seed).fold(stage=_ST_UPDATE_ROOT, element=update_index))
    idx = replay.sample_indices(stream.substream(_ST_MINIBATCH, batch_size))

    obs = replay.obs[idx]
    next_obs = replay.next_obs[idx]
    if pipeline:
        obs = run_pipeline(PixelBatch(obs), pipeline, seed=stream.fold(_ST_AUG_OBS)).data
        next_obs = run_pipeline(PixelBatch(next_obs), pipeline, seed=stream.fold(_ST_AUG_NEXT)).data
    if crop_to is not None and obs.shape[-2:] != tuple(crop_to):
        obs = center_crop(obs, *crop_to)
        next_obs = center_crop(next_obs, *crop_to)
    if obs.shape[-2:] != agent.obs_shape[-2:]:
        raise ConfigError(
            f"network expects {agent.obs_shape[-2:]} inputs, update produced {obs.shape[-2:]}"
        )

    obs_net = obs_to_net(obs)
    next_obs_net = obs_to_net(next_obs)
    actions = replay.actions[idx]
    rewards = replay.rewards[idx]
    dones = replay.dones[idx]

    tgt_noise = stream.substream(_ST_TARGET_NOISE, batch_size).normal(agent.action_dim)
    targets = compute_bellman_targets(agent, rewards, dones, next_obs_net,
                                      tgt_noise.astype(np.float32))

    c_loss, _ = critic_loss(agent, obs_net, actions, targets)
    if not np.isfinite(c_loss.data):
        raise NumericsError(f"critic loss diverged at update {update_index}")
    agent.critic_opt.zero_grad()
    c_loss.backward()
    agent.critic_opt.step()

    act_noise = stream.substream(_ST_ACTOR_NOISE, batch_size).normal(agent.action_dim)
    a_loss, logp = actor_loss(agent, obs_net, act_noise.astype(np.float32))
    if not np.isfinite(a_loss.data):
        raise NumericsError(f"actor loss diverged at update {update_index}")
    agent.actor_opt.zero_grad()
    a_loss.backward()
    agent.actor_opt.step()

    al_loss = alpha_loss(agent, logp.data)
    agent.alpha_opt.zero_grad()
    al_loss.backward()
    agent.alpha_opt.step()

    agent.updates_done += 1
    if agent.updates_done % agent.target_update_freq == 0:
        nn.ema_update(agent.target_encoder.parameters(), agent.encoder.parameters(),
                      agent.tau_encoder)
        for tq, oq in zip(agent.target_q_heads, agent.q_heads):
            nn.ema_update(tq.parameters(), oq.parameters(), agent.tau_q)

    return {
        "critic_loss": float(c_loss.data),
        "actor_loss": float(a_loss.data),
        "alpha": agent.alpha,
    }
