"""Stack-consistent batched image augmentations.

The contract that everything here serves: a random draw is made once per batch
element and reused for every frame stacked inside that element's observation.
Sampling (``sample_plan``) is split from application (``apply``) so the draw
record is inspectable, the kernels are deterministic, and benchmarks can time
pure pixel work.

Randomness is counter-based: stage i of a pipeline draws from
``rng.substream(stage=i, n_elements=B)``, so results never depend on thread
schedule or on how many other stages ran.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .imagecore import PixelBatch, hsv_to_rgb, rgb_to_hsv
from .rng import RngStream

# --------------------------------------------------------------------------
# Kind definitions
# --------------------------------------------------------------------------

FILL_BLACK = "black"
FILL_COLOR = "color"


@dataclass(frozen=True)
class Crop:
    """Extract an out_h x out_w window at a per-element random offset."""

    out_h: int
    out_w: int

    def __post_init__(self):
        if self.out_h < 1 or self.out_w < 1:
            raise ConfigError(f"crop output dims must be >= 1, got {self.out_h}x{self.out_w}")


@dataclass(frozen=True)
class Grayscale:
    """With probability p, replace an element's frames by replicated luma."""

    p: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"grayscale p must be in [0,1], got {self.p}")


@dataclass(frozen=True)
class Cutout:
    """Blank one random rectangle per element, black or one random color.

    Side lengths are uniform in [min_frac*dim, max_frac*dim] per axis and the
    rectangle always lies fully inside the frame.
    """

    min_frac: float = 0.1
    max_frac: float = 0.3
    fill: str = FILL_BLACK

    def __post_init__(self):
        if not (0.0 < self.min_frac <= self.max_frac <= 1.0):
            raise ConfigError(
                f"cutout needs 0 < min_frac <= max_frac <= 1, got {self.min_frac}, {self.max_frac}"
            )
        if self.fill not in (FILL_BLACK, FILL_COLOR):
            raise ConfigError(f"cutout fill must be black or color, got {self.fill!r}")


@dataclass(frozen=True)
class Flip:
    """Mirror across the vertical axis with probability p."""

    p: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"flip p must be in [0,1], got {self.p}")


@dataclass(frozen=True)
class Rotate:
    """Rotate by a uniform quarter-turn count k in {0,1,2,3} (clockwise)."""


@dataclass(frozen=True)
class RandomConv:
    """Push frames through one random 3-in/3-out kernel per element.

    Replicate-edge padding keeps the shape; output is clamped to range.
    """

    kernel: int = 3
    weight_std_mode: str = "glorot"

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"conv kernel must be odd and >= 1, got {self.kernel}")
        if self.weight_std_mode not in ("glorot", "unit"):
            raise ConfigError(f"unknown weight_std_mode {self.weight_std_mode!r}")


@dataclass(frozen=True)
class ColorJitter:
    """Additive hue shift (wrapped) and multiplicative S/V scaling in HSV."""

    hue_delta: float = 0.1
    sat_delta: float = 0.4
    val_delta: float = 0.4

    def __post_init__(self):
        for name in ("hue_delta", "sat_delta", "val_delta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"jitter {name} must be in [0,1), got {v}")


AugKind = Crop | Grayscale | Cutout | Flip | Rotate | RandomConv | ColorJitter


@dataclass
class DrawPlan:
    """Every random draw one augmentation stage needs, one record per element.

    All arrays share leading dimension B.  A plan is bound to the kind it was
    sampled for and to the batch geometry it saw.
    """

    kind: AugKind
    draws: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def batch(self) -> int:
        return next(iter(self.draws.values())).shape[0]

    def tobytes(self) -> bytes:
        parts = [type(self.kind).__name__.encode()]
        for name in sorted(self.draws):
            parts.append(name.encode())
            parts.append(np.ascontiguousarray(self.draws[name]).tobytes())
        return b"|".join(parts)


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------

def _needs_rgb(kind: AugKind) -> bool:
    if isinstance(kind, (Grayscale, RandomConv, ColorJitter)):
        return True
    return isinstance(kind, Cutout) and kind.fill == FILL_COLOR


def check_shape(kind: AugKind, shape: tuple[int, int, int, int, int]):
    """Raise ConfigError when kind cannot operate on (B,S,C,H,W)."""
    b, s, c, h, w = shape
    if _needs_rgb(kind) and c != 3:
        raise ConfigError(f"{kind_name(kind)} needs 3 channels, batch has {c}")
    if isinstance(kind, Rotate) and h != w:
        raise ConfigError(f"rotate needs square frames, got {h}x{w}")
    if isinstance(kind, Crop) and (kind.out_h > h or kind.out_w > w):
        raise ConfigError(f"crop {kind.out_h}x{kind.out_w} exceeds input {h}x{w}")


def out_shape(kind: AugKind, shape) -> tuple[int, int, int, int, int]:
    b, s, c, h, w = shape
    if isinstance(kind, Crop):
        return (b, s, c, kind.out_h, kind.out_w)
    return tuple(shape)


def _cutout_side_bounds(frac_lo: float, frac_hi: float, dim: int) -> tuple[int, int]:
    lo = max(1, int(np.floor(frac_lo * dim)))
    hi = max(lo, int(np.floor(frac_hi * dim)))
    return lo, hi


def sample_plan(kind: AugKind, shape, rng: RngStream, stage: int) -> DrawPlan:
    """Draw one complete record per batch element from substream (stage, i).

    The per-kind draw layout is part of the determinism contract: the j-th
    draw of element i is fixed for all time, so plans are reproducible across
    runs, thread counts, and language bindings.
    """
    shape = tuple(int(x) for x in shape)
    if len(shape) != 5:
        raise ConfigError(f"expected (B,S,C,H,W) metadata, got {shape}")
    check_shape(kind, shape)
    b, s, c, h, w = shape
    ss = rng.substream(stage=stage, n_elements=b)

    if isinstance(kind, Crop):
        dy = ss.integers(h - kind.out_h + 1)
        dx = ss.integers(w - kind.out_w + 1)
        return DrawPlan(kind, {"dy": dy, "dx": dx})

    if isinstance(kind, Grayscale):
        return DrawPlan(kind, {"flag": ss.uniform1() < kind.p})

    if isinstance(kind, Cutout):
        lo_h, hi_h = _cutout_side_bounds(kind.min_frac, kind.max_frac, h)
        lo_w, hi_w = _cutout_side_bounds(kind.min_frac, kind.max_frac, w)
        side_h = lo_h + ss.integers(hi_h - lo_h + 1)
        side_w = lo_w + ss.integers(hi_w - lo_w + 1)
        y0 = ss.integers(h - side_h + 1)
        x0 = ss.integers(w - side_w + 1)
        color = ss.uniform(3)
        return DrawPlan(
            kind, {"side_h": side_h, "side_w": side_w, "y0": y0, "x0": x0, "color": color}
        )

    if isinstance(kind, Flip):
        return DrawPlan(kind, {"flag": ss.uniform1() < kind.p})

    if isinstance(kind, Rotate):
        return DrawPlan(kind, {"k": ss.integers(4)})

    if isinstance(kind, RandomConv):
        k = kind.kernel
        if kind.weight_std_mode == "glorot":
            fan = 3 * k * k
            std = float(np.sqrt(2.0 / (fan + fan)))
        else:
            std = 1.0
        weights = ss.normal(3 * 3 * k * k).reshape(b, 3, 3, k, k) * std
        return DrawPlan(kind, {"kernel": weights})

    if isinstance(kind, ColorJitter):
        u = ss.uniform(3)
        return DrawPlan(
            kind,
            {
                "dh": (2.0 * u[:, 0] - 1.0) * kind.hue_delta,
                "s_scale": 1.0 + (2.0 * u[:, 1] - 1.0) * kind.sat_delta,
                "v_scale": 1.0 + (2.0 * u[:, 2] - 1.0) * kind.val_delta,
            },
        )

    raise ConfigError(f"unknown augmentation kind {kind!r}")


# --------------------------------------------------------------------------
# Batched kernels.  Each takes (B,S,C,H,W) data plus plan arrays and returns
# a new array; nothing here touches an RNG.
# --------------------------------------------------------------------------

def _luma(rgb64: np.ndarray) -> np.ndarray:
    # explicit weighted sum, never a BLAS reduction: the naive per-frame path
    # must reproduce these bits exactly
    r = rgb64[..., 0, :, :]
    g = rgb64[..., 1, :, :]
    bl = rgb64[..., 2, :, :]
    return r * 0.299 + g * 0.587 + bl * 0.114


def _gray_frames(x: np.ndarray) -> np.ndarray:
    """(...,3,H,W) -> (...,3,H,W) luma replicated; dtype preserved."""
    if x.dtype == np.uint8:
        y = np.floor(_luma(x.astype(np.float64)) + 0.5).astype(np.uint8)
    else:
        y = np.clip(_luma(x.astype(np.float64)), 0.0, 1.0).astype(x.dtype)
    return np.repeat(y[..., None, :, :], 3, axis=-3)


def _crop_batched(x: np.ndarray, dy: np.ndarray, dx: np.ndarray, oh: int, ow: int) -> np.ndarray:
    b = x.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(x, (oh, ow), axis=(3, 4))
    return np.ascontiguousarray(win[np.arange(b), :, :, dy, dx])


def _grayscale_batched(x: np.ndarray, flag: np.ndarray) -> np.ndarray:
    out = x.copy()
    if flag.any():
        out[flag] = _gray_frames(x[flag])
    return out


def _fill_values(color: np.ndarray, dtype) -> np.ndarray:
    # (B, 3) fill pixel per element in the batch's dtype; color fill is
    # RGB-only so no single-channel case exists here
    if dtype == np.uint8:
        return np.floor(color * 255.0 + 0.5).astype(np.uint8)
    return color.astype(dtype)


def _cutout_batched(x: np.ndarray, plan: DrawPlan, fill_color: bool) -> np.ndarray:
    out = x.copy()
    if fill_color:
        vals = _fill_values(plan.draws["color"], x.dtype)
    sh, sw = plan.draws["side_h"], plan.draws["side_w"]
    y0, x0 = plan.draws["y0"], plan.draws["x0"]
    for b in range(x.shape[0]):
        region = out[b, :, :, y0[b] : y0[b] + sh[b], x0[b] : x0[b] + sw[b]]
        region[:] = vals[b][None, :, None, None] if fill_color else 0
    return out


def _flip_batched(x: np.ndarray, flag: np.ndarray) -> np.ndarray:
    out = x.copy()
    if flag.any():
        out[flag] = x[flag][..., ::-1]
    return out


def _rotate_batched(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    out = x.copy()
    for turns in (1, 2, 3):
        mask = k == turns
        if mask.any():
            # positive k is clockwise: source (y,x) lands at (x, H-1-y) for k=1
            out[mask] = np.rot90(x[mask], k=-turns, axes=(-2, -1))
    return out


def _conv_frames(x64: np.ndarray, kernels: np.ndarray, pad: int) -> np.ndarray:
    """Stationary tap-loop convolution on (B,S,3,H,W) float64.

    The accumulation order (p, q, out-channel, in-channel) is identical in the
    naive path, which keeps the two bitwise-equal.
    """
    h, w = x64.shape[-2:]
    padded = np.pad(x64, [(0, 0)] * 3 + [(pad, pad), (pad, pad)], mode="edge")
    out = np.zeros_like(x64)
    k = kernels.shape[-1]
    for p in range(k):
        for q in range(k):
            shifted = padded[..., p : p + h, q : q + w]
            for o in range(3):
                for ci in range(3):
                    out[:, :, o] += kernels[:, o, ci, p, q, None, None, None] * shifted[:, :, ci]
    return out


def _random_conv_batched(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    pad = kernels.shape[-1] // 2
    if x.dtype == np.uint8:
        y = _conv_frames(x.astype(np.float64) / 255.0, kernels, pad)
        return np.floor(np.clip(y, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    y = np.clip(_conv_frames(x.astype(np.float64), kernels, pad), 0.0, 1.0)
    return y.astype(x.dtype)


def _jitter_frames(x64: np.ndarray, dh, s_scale, v_scale) -> np.ndarray:
    hsv = rgb_to_hsv(x64)
    hsv[..., 0, :, :] = (hsv[..., 0, :, :] + dh) % 1.0
    hsv[..., 1, :, :] = np.clip(hsv[..., 1, :, :] * s_scale, 0.0, 1.0)
    hsv[..., 2, :, :] = np.clip(hsv[..., 2, :, :] * v_scale, 0.0, 1.0)
    return hsv_to_rgb(hsv)


def _color_jitter_batched(x: np.ndarray, plan: DrawPlan) -> np.ndarray:
    dh = plan.draws["dh"][:, None, None, None]
    sc = plan.draws["s_scale"][:, None, None, None]
    vc = plan.draws["v_scale"][:, None, None, None]
    if x.dtype == np.uint8:
        y = _jitter_frames(x.astype(np.float64) / 255.0, dh, sc, vc)
        return np.floor(y * 255.0 + 0.5).astype(np.uint8)
    return _jitter_frames(x.astype(np.float64), dh, sc, vc).astype(x.dtype)


def _apply_block(x: np.ndarray, kind: AugKind, plan: DrawPlan, idx: np.ndarray) -> np.ndarray:
    """Apply kind to elements idx of x using matching plan rows."""
    sub = x[idx]
    if isinstance(kind, Crop):
        return _crop_batched(sub, plan.draws["dy"][idx], plan.draws["dx"][idx], kind.out_h, kind.out_w)
    if isinstance(kind, Grayscale):
        return _grayscale_batched(sub, plan.draws["flag"][idx])
    if isinstance(kind, Cutout):
        sliced = DrawPlan(kind, {k: v[idx] for k, v in plan.draws.items()})
        return _cutout_batched(sub, sliced, kind.fill == FILL_COLOR)
    if isinstance(kind, Flip):
        return _flip_batched(sub, plan.draws["flag"][idx])
    if isinstance(kind, Rotate):
        return _rotate_batched(sub, plan.draws["k"][idx])
    if isinstance(kind, RandomConv):
        return _random_conv_batched(sub, plan.draws["kernel"][idx])
    if isinstance(kind, ColorJitter):
        sliced = DrawPlan(kind, {k: v[idx] for k, v in plan.draws.items()})
        return _color_jitter_batched(sub, sliced)
    raise ConfigError(f"unknown augmentation kind {kind!r}")


def apply(batch: PixelBatch, kind: AugKind, plan: DrawPlan, workers: int = 1) -> PixelBatch:
    """Transform every frame of element b with plan record b.

    Pure pixel work: identical (batch, kind, plan) gives identical bytes no
    matter how many workers run.  Workers split the batch into contiguous
    chunks; every kernel is per-element so the split is invisible.
    """
    x = batch.data
    check_shape(kind, x.shape)
    if plan.kind != kind:
        raise ConfigError(f"plan was sampled for {plan.kind!r}, not {kind!r}")
    if plan.batch != x.shape[0]:
        raise ConfigError(f"plan covers {plan.batch} elements, batch has {x.shape[0]}")
    if isinstance(kind, Crop):
        max_dy = int(plan.draws["dy"].max())
        max_dx = int(plan.draws["dx"].max())
        if max_dy + kind.out_h > x.shape[3] or max_dx + kind.out_w > x.shape[4]:
            raise ConfigError("crop plan offsets fall outside this batch's frames")

    b = x.shape[0]
    if workers <= 1 or b == 1:
        return PixelBatch(_apply_block(x, kind, plan, np.arange(b)))
    chunks = np.array_split(np.arange(b), min(workers, b))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: _apply_block(x, kind, plan, idx), chunks))
    return PixelBatch(np.concatenate(parts, axis=0))


# --------------------------------------------------------------------------
# Convenience wrappers matching the op-per-kind vocabulary
# --------------------------------------------------------------------------

def crop(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


def grayscale(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


def cutout(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


def flip(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


def rotate(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


def random_conv(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


def color_jitter(batch: PixelBatch, plan: DrawPlan) -> PixelBatch:
    return apply(batch, plan.kind, plan)


# --------------------------------------------------------------------------
# Naive per-frame reference path (benchmark baseline, parity oracle)
# --------------------------------------------------------------------------

def _frame_apply(frame: np.ndarray, kind: AugKind, plan: DrawPlan, b: int) -> np.ndarray:
    """One (C,H,W) frame through element b's draw record."""
    x = frame[None, None]  # reuse the batched kernels at B=S=1
    one = DrawPlan(kind, {k: v[b : b + 1] for k, v in plan.draws.items()})
    return _apply_block(x, kind, one, np.arange(1))[0, 0]


def apply_naive(batch: PixelBatch, kind: AugKind, plan: DrawPlan) -> PixelBatch:
    """Loop over every frame one at a time.

    This is the reference a non-vectorized implementation would produce; the
    benchmark compares the batched kernels against it and tests assert the two
    agree bitwise.
    """
    x = batch.data
    check_shape(kind, x.shape)
    if plan.batch != x.shape[0]:
        raise ConfigError(f"plan covers {plan.batch} elements, batch has {x.shape[0]}")
    out = np.empty(out_shape(kind, x.shape), dtype=x.dtype)
    for b in range(x.shape[0]):
        for s in range(x.shape[1]):
            out[b, s] = _frame_apply(x[b, s], kind, plan, b)
    return PixelBatch(out)


# --------------------------------------------------------------------------
# Pipelines
# --------------------------------------------------------------------------

def run_pipeline(batch: PixelBatch, pipeline, seed: int, workers: int = 1) -> PixelBatch:
    """Apply stages left to right; stage i draws from substream (seed, i, .).

    An empty pipeline returns the batch unchanged.  Shape compatibility is
    checked stage by stage (a crop shrinks what downstream stages see).
    """
    rng = RngStream(seed)
    out = batch
    for i, kind in enumerate(pipeline):
        plan = sample_plan(kind, out.shape, rng, stage=i)
        out = apply(out, kind, plan, workers=workers)
    return out


# --------------------------------------------------------------------------
# Pipeline grammar
# --------------------------------------------------------------------------

PIPELINE_GRAMMAR = """\
pipeline   := "" | stage ("," stage)*
stage      := name [":" args]
args       := arg (";" arg)*
arg        := key "=" value          (crop also takes a positional HxW or N)

names and parameters (defaults in parentheses):
  crop:HxW          output height x width, e.g. crop:84x84; crop:84 = square
  grayscale         p   = probability of conversion          (0.3)
  cutout            min = smallest side as a fraction        (0.1)
                    max = largest side as a fraction         (0.3)
  cutout-color      as cutout, filled with one random color per element
  flip              p   = probability of horizontal mirror   (0.5)
  rotate            no parameters; uniform quarter-turns
  conv              k   = odd kernel size                    (3)
  jitter            h   = max additive hue shift, wrapped    (0.1)
                    s   = max relative saturation change     (0.4)
                    v   = max relative value change          (0.4)

examples:
  crop:84x84,grayscale:p=0.3
  cutout:min=0.1;max=0.3,flip
  conv:k=5,jitter:h=0.05;s=0.2;v=0.2

whitespace around separators is ignored; every draw is made once per batch
element and shared by all frames stacked in that element.
"""

_KIND_NAMES = {
    Crop: "crop",
    Grayscale: "grayscale",
    Flip: "flip",
    Rotate: "rotate",
    RandomConv: "conv",
    ColorJitter: "jitter",
}


def kind_name(kind: AugKind) -> str:
    if isinstance(kind, Cutout):
        return "cutout-color" if kind.fill == FILL_COLOR else "cutout"
    return _KIND_NAMES[type(kind)]


def _parse_float(name: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"stage {name!r}: {key}={raw!r} is not a number") from None


def _parse_args(name: str, text: str, allowed: dict[str, str]) -> dict[str, float]:
    out = {}
    for piece in text.split(";"):
        piece = piece.strip()
        if not piece or "=" not in piece:
            raise ConfigError(f"stage {name!r}: bad argument {piece!r}, expected key=value")
        key, _, raw = piece.partition("=")
        key = key.strip()
        if key not in allowed:
            raise ConfigError(
                f"stage {name!r}: unknown parameter {key!r} (allowed: {', '.join(allowed)})"
            )
        if allowed[key] in out:
            raise ConfigError(f"stage {name!r}: duplicate parameter {key!r}")
        out[allowed[key]] = _parse_float(name, key, raw.strip())
    return out


def _parse_stage(text: str) -> AugKind:
    name, sep, args = text.partition(":")
    name = name.strip()
    args = args.strip()
    if sep and not args:
        raise ConfigError(f"stage {name!r}: ':' present but no arguments follow")

    if name == "crop":
        if not sep:
            raise ConfigError("stage 'crop': output size required, e.g. crop:84x84")
        dims = args.split("x")
        try:
            if len(dims) == 1:
                oh = ow = int(dims[0])
            elif len(dims) == 2:
                oh, ow = int(dims[0]), int(dims[1])
            else:
                raise ValueError
        except ValueError:
            raise ConfigError(f"stage 'crop': bad size {args!r}, expected HxW or N") from None
        return Crop(oh, ow)

    if name == "grayscale":
        kw = _parse_args(name, args, {"p": "p"}) if sep else {}
        return Grayscale(**kw)
    if name in ("cutout", "cutout-color"):
        kw = _parse_args(name, args, {"min": "min_frac", "max": "max_frac"}) if sep else {}
        return Cutout(fill=FILL_COLOR if name == "cutout-color" else FILL_BLACK, **kw)
    if name == "flip":
        kw = _parse_args(name, args, {"p": "p"}) if sep else {}
        return Flip(**kw)
    if name == "rotate":
        if sep:
            raise ConfigError("stage 'rotate' takes no parameters")
        return Rotate()
    if name == "conv":
        kw = _parse_args(name, args, {"k": "kernel"}) if sep else {}
        if "kernel" in kw:
            if kw["kernel"] != int(kw["kernel"]):
                raise ConfigError(f"stage 'conv': k must be an integer, got {kw['kernel']}")
            kw["kernel"] = int(kw["kernel"])
        return RandomConv(**kw)
    if name == "jitter":
        table = {"h": "hue_delta", "s": "sat_delta", "v": "val_delta"}
        kw = _parse_args(name, args, table) if sep else {}
        return ColorJitter(**kw)

    raise ConfigError(f"unknown augmentation {name!r} in pipeline spec")


def parse_pipeline(text: str) -> list[AugKind]:
    """Parse a comma-separated pipeline spec; '' means the empty pipeline."""
    text = text.strip()
    if not text:
        return []
    return [_parse_stage(piece) for piece in text.split(",")]


def format_pipeline(pipeline) -> str:
    """Canonical spec string; parse(format(p)) == p."""
    out = []
    for kind in pipeline:
        if isinstance(kind, Crop):
            out.append(f"crop:{kind.out_h}x{kind.out_w}")
        elif isinstance(kind, Grayscale):
            out.append(f"grayscale:p={kind.p:g}")
        elif isinstance(kind, Cutout):
            out.append(f"{kind_name(kind)}:min={kind.min_frac:g};max={kind.max_frac:g}")
        elif isinstance(kind, Flip):
            out.append(f"flip:p={kind.p:g}")
        elif isinstance(kind, Rotate):
            out.append("rotate")
        elif isinstance(kind, RandomConv):
            out.append(f"conv:k={kind.kernel}")
        elif isinstance(kind, ColorJitter):
            out.append(
                f"jitter:h={kind.hue_delta:g};s={kind.sat_delta:g};v={kind.val_delta:g}"
            )
        else:
            raise ConfigError(f"unknown augmentation kind {kind!r}")
    return ",".join(out)
