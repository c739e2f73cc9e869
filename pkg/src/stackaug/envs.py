"""Two tiny procedurally generated pixel environments plus the frame-stack /
action-repeat wrapper and deterministic level splits.

Every episode is a pure function of (level seed, action sequence): themes,
layouts, and dynamics all derive from counter-based streams, never from
global state.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .rng import RngStream

GRID = 8
CELL = 6
BASE_RENDER = GRID * CELL  # 48

# background pattern kinds x background color pairs x sprite palettes
_PATTERNS = ("solid", "checker", "hstripe", "vstripe")

_BG_PAIRS = np.array(
    [
        [[40, 40, 56], [52, 52, 72]],
        [[24, 48, 32], [36, 64, 44]],
        [[60, 34, 30], [80, 48, 42]],
        [[30, 44, 60], [44, 60, 80]],
        [[52, 30, 58], [70, 44, 78]],
        [[58, 54, 28], [78, 72, 40]],
        [[28, 56, 56], [40, 76, 76]],
        [[46, 46, 46], [62, 62, 62]],
    ],
    dtype=np.uint8,
)

_SPRITE_PAIRS = np.array(
    [
        [[230, 60, 60], [250, 210, 60]],
        [[70, 200, 90], [240, 240, 240]],
        [[80, 120, 250], [250, 160, 40]],
        [[240, 100, 200], [120, 250, 230]],
        [[250, 250, 120], [90, 90, 250]],
        [[160, 240, 70], [250, 120, 90]],
    ],
    dtype=np.uint8,
)

THEME_COUNT = len(_PATTERNS) * len(_BG_PAIRS) * len(_SPRITE_PAIRS)


def _paint_background(size: int, theme_idx: int) -> np.ndarray:
    """(3, size, size) byte canvas for one theme index."""
    pattern = _PATTERNS[theme_idx % len(_PATTERNS)]
    rest = theme_idx // len(_PATTERNS)
    base, accent = _BG_PAIRS[rest % len(_BG_PAIRS)]
    canvas = np.empty((3, size, size), dtype=np.uint8)
    canvas[:] = base[:, None, None]
    ys, xs = np.mgrid[0:size, 0:size]
    if pattern == "checker":
        mask = ((ys // CELL) + (xs // CELL)) % 2 == 1
    elif pattern == "hstripe":
        mask = (ys // 3) % 2 == 1
    elif pattern == "vstripe":
        mask = (xs // 3) % 2 == 1
    else:
        mask = np.zeros((size, size), dtype=bool)
    canvas[:, mask] = accent[:, None]
    return canvas


def _sprite_colors(theme_idx: int) -> tuple[np.ndarray, np.ndarray]:
    pair = _SPRITE_PAIRS[theme_idx // (len(_PATTERNS) * len(_BG_PAIRS))]
    return pair[0], pair[1]


class ChaseGrid:
    """8x8 grid world: move onto the coin cell, +1 reward, episode over.

    Actions: 0 up, 1 down, 2 left, 3 right, 4 noop.  Walls stop movement.
    The level seed fixes the visual theme and the starting layout; dynamics
    are identical across levels.
    """

    n_actions = 5
    discrete = True
    channels = 3

    def __init__(self, level_seed: int, render_size: int = BASE_RENDER, max_steps: int = 100):
        if render_size < BASE_RENDER:
            raise ConfigError(f"render_size must be >= {BASE_RENDER}, got {render_size}")
        self.level_seed = int(level_seed)
        self.render_size = int(render_size)
        self.max_steps = int(max_steps)
        rng = RngStream(self.level_seed)
        draws = rng.single(stage=0)
        self.theme_idx = int(draws.integers(THEME_COUNT)[0])
        agent = int(draws.integers(GRID * GRID)[0])
        coin = int(draws.integers(GRID * GRID - 1)[0])
        if coin >= agent:
            coin += 1  # skip the agent cell so exactly one distinct coin exists
        self._start = (agent // GRID, agent % GRID, coin // GRID, coin % GRID)
        self._background = _paint_background(self.render_size, self.theme_idx)
        self._agent_color, self._coin_color = _sprite_colors(self.theme_idx)
        self._margin = (self.render_size - BASE_RENDER) // 2
        self.reset()

    def reset(self) -> np.ndarray:
        ay, ax, cy, cx = self._start
        self.agent = [ay, ax]
        self.coin = (cy, cx)
        self.steps = 0
        self.done = False
        return self.render()

    def step(self, action: int):
        if self.done:
            raise ConfigError("step() after episode end; call reset()")
        if not 0 <= int(action) < self.n_actions:
            raise ConfigError(f"action {action} outside [0,{self.n_actions})")
        dy, dx = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))[int(action)]
        self.agent[0] = min(max(self.agent[0] + dy, 0), GRID - 1)
        self.agent[1] = min(max(self.agent[1] + dx, 0), GRID - 1)
        self.steps += 1
        reward = 0.0
        if tuple(self.agent) == self.coin:
            reward = 1.0
            self.done = True
        elif self.steps >= self.max_steps:
            self.done = True
        return self.render(), reward, self.done

    def _cell_box(self, cy: int, cx: int) -> tuple[slice, slice]:
        y0 = self._margin + cy * CELL
        x0 = self._margin + cx * CELL
        return slice(y0, y0 + CELL), slice(x0, x0 + CELL)

    def render(self) -> np.ndarray:
        """(3, render_size, render_size) bytes; pure function of state."""
        frame = self._background.copy()
        ys, xs = self._cell_box(*self.coin)
        # coin: bright diamond on its cell
        cyi, cxi = ys.start + CELL // 2, xs.start + CELL // 2
        for r in range(-2, 3):
            span = 2 - abs(r)
            frame[:, cyi + r, cxi - span : cxi + span + 1] = self._coin_color[:, None]
        ay, ax = self._cell_box(self.agent[0], self.agent[1])
        frame[:, ay.start + 1 : ay.stop - 1, ax.start + 1 : ax.stop - 1] = (
            self._agent_color[:, None, None]
        )
        return frame


class PointMass:
    """Continuous 2-d reach task in the unit box [0,1]^2.

    Euler dynamics with damping; action is acceleration in [-1,1]^2; reward is
    the negative distance to the target, so it lives in [-sqrt(2), 0].
    """

    action_dim = 2
    discrete = False
    channels = 3

    DT = 0.15
    DAMPING = 0.6
    ACCEL = 0.35

    def __init__(self, level_seed: int, render_size: int = BASE_RENDER, max_steps: int = 100):
        if render_size < BASE_RENDER:
            raise ConfigError(f"render_size must be >= {BASE_RENDER}, got {render_size}")
        self.level_seed = int(level_seed)
        self.render_size = int(render_size)
        self.max_steps = int(max_steps)
        rng = RngStream(self.level_seed)
        draws = rng.single(stage=0)
        u = draws.uniform(4)[0]
        self._start_pos = np.array([0.15 + 0.7 * u[0], 0.15 + 0.7 * u[1]])
        self.target = np.array([0.15 + 0.7 * u[2], 0.15 + 0.7 * u[3]])
        tint = draws.integers(len(_BG_PAIRS))[0]
        self._background = np.empty((3, self.render_size, self.render_size), dtype=np.uint8)
        self._background[:] = _BG_PAIRS[tint][0][:, None, None]
        self._margin = (self.render_size - BASE_RENDER) // 2
        self.reset()

    def reset(self) -> np.ndarray:
        self.pos = self._start_pos.copy()
        self.vel = np.zeros(2)
        self.steps = 0
        self.done = False
        return self.render()

    def step(self, action):
        if self.done:
            raise ConfigError("step() after episode end; call reset()")
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)
        self.vel = self.DAMPING * self.vel + self.ACCEL * a
        self.pos = self.pos + self.DT * self.vel
        hit = (self.pos < 0.0) | (self.pos > 1.0)
        self.pos = np.clip(self.pos, 0.0, 1.0)
        self.vel[hit] = 0.0
        self.steps += 1
        reward = -float(np.linalg.norm(self.pos - self.target))
        self.done = self.steps >= self.max_steps
        return self.render(), reward, self.done

    def _to_px(self, p: np.ndarray) -> tuple[int, int]:
        # unit coordinates map onto the inner 48x48 play area
        y = self._margin + int(round(p[1] * (BASE_RENDER - 1)))
        x = self._margin + int(round(p[0] * (BASE_RENDER - 1)))
        return y, x

    def render(self) -> np.ndarray:
        frame = self._background.copy()
        size = self.render_size
        ty, tx = self._to_px(self.target)
        # target: green cross
        frame[:, max(ty - 3, 0) : ty + 4, tx] = np.array([60, 220, 60], np.uint8)[:, None]
        frame[:, ty, max(tx - 3, 0) : tx + 4] = np.array([60, 220, 60], np.uint8)[:, None]
        # agent: warm disc, radius 2.5
        ay, ax = self._to_px(self.pos)
        ys, xs = np.mgrid[0:size, 0:size]
        disc = (ys - ay) ** 2 + (xs - ax) ** 2 <= 6
        frame[:, disc] = np.array([250, 150, 50], np.uint8)[:, None]
        return frame


class EnvWrapper:
    """Frame stack + action repeat around either environment.

    Observations are (S, C, H, W) bytes, oldest frame first.  A wrapper step
    advances the environment-step counter by the full action repeat even when
    the episode terminates mid-repeat, so env-step budgets stay exact.
    """

    def __init__(self, env, stack: int = 3, action_repeat: int = 1):
        if stack < 1 or action_repeat < 1:
            raise ConfigError("stack and action_repeat must be >= 1")
        self.env = env
        self.stack = stack
        self.action_repeat = action_repeat
        self.env_steps = 0
        self._frames: list[np.ndarray] = []

    @property
    def discrete(self) -> bool:
        return self.env.discrete

    def obs_shape(self) -> tuple[int, int, int, int]:
        s = self.env.render_size
        return (self.stack, self.env.channels, s, s)

    def reset(self) -> np.ndarray:
        frame = self.env.reset()
        self._frames = [frame.copy() for _ in range(self.stack)]
        return self._observation()

    def step(self, action):
        total = 0.0
        done = False
        frame = None
        for _ in range(self.action_repeat):
            frame, r, done = self.env.step(action)
            total += r
            if done:
                break
        self.env_steps += self.action_repeat
        self._frames.pop(0)
        self._frames.append(frame.copy())
        return self._observation(), total, done

    def _observation(self) -> np.ndarray:
        return np.stack(self._frames, axis=0)


def make_env(name: str, level_seed: int, render_size: int = BASE_RENDER,
             max_steps: int = 100):
    if name == "chasegrid":
        return ChaseGrid(level_seed, render_size=render_size, max_steps=max_steps)
    if name == "pointmass":
        return PointMass(level_seed, render_size=render_size, max_steps=max_steps)
    raise ConfigError(f"unknown env {name!r} (chasegrid or pointmass)")


def make_split(n_train: int, n_test: int, master_seed: int) -> tuple[list[int], list[int]]:
    """Disjoint, deterministic level-seed lists for train and test."""
    if n_train < 0 or n_test < 0:
        raise ConfigError("level counts must be nonnegative")
    need = n_train + n_test
    seeds: list[int] = []
    seen: set[int] = set()
    rng = RngStream(master_seed)
    element = 0
    while len(seeds) < need:
        s = rng.fold(stage=101, element=element)
        element += 1
        if s not in seen:  # collisions are ~impossible but disjointness is a contract
            seen.add(s)
            seeds.append(s)
    return seeds[:n_train], seeds[n_train:]
