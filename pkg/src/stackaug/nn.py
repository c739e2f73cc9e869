"""Minimal reverse-mode autograd on numpy, sized for toy-scale RL.

One Tensor class, a dozen ops, explicit backward closures.  Parameters are
leaf tensors with ``requires_grad=True``; everything else tracks gradients
only while some ancestor needs them, so wrapping a module in ``frozen(...)``
keeps its parameter grad buffers exactly zero by construction rather than by
cleanup.

Training runs in float32; gradient-check tests build float64 graphs and the
ops preserve whatever dtype flows in.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from .errors import ConfigError, NumericsError
from .rng import RngStream

_DEBUG_NAN = False


def set_debug_nan(enabled: bool):
    """When on, every op output is checked for NaN/inf and aborts loudly."""
    global _DEBUG_NAN
    _DEBUG_NAN = bool(enabled)


def _check_finite(data: np.ndarray, where: str):
    if _DEBUG_NAN and not np.isfinite(data).all():
        raise NumericsError(f"non-finite values produced by {where}")


class Tensor:
    """N-d array plus an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "is_param", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.is_param = False
        self.grad = np.zeros_like(self.data) if requires_grad and not _parents else None
        self._parents = _parents
        self._backward = _backward
        _check_finite(self.data, "tensor construction")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ConfigError("backward() starts from a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar; python scalars take a fast path that cannot silently
    # promote float32 data to float64
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return scalar_add(self, float(other))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scalar_mul(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, scalar_mul(other, -1.0))
        return scalar_add(self, -float(other))

    def __rsub__(self, other):
        return scalar_add(scalar_mul(self, -1.0), float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad = t.grad + g


def _needs(*tensors) -> bool:
    return any(t.requires_grad for t in tensors)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g down to shape, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


def _make(data, parents, backward) -> Tensor:
    req = _needs(*parents)
    if not req:
        return Tensor(data)
    # grad routing is decided when the graph is BUILT: a parameter frozen at
    # build time must stay grad-free even if unfrozen before backward() runs
    snapshot = [(p, p.requires_grad) for p in parents]

    def wrapped(g):
        current = [p.requires_grad for p, _ in snapshot]
        for p, f in snapshot:
            p.requires_grad = f
        try:
            backward(g)
        finally:
            for (p, _), f in zip(snapshot, current):
                p.requires_grad = f

    return Tensor(data, requires_grad=True,
                  _parents=tuple(p for p in parents if p.requires_grad),
                  _backward=wrapped)


# ----------------------------------------------------------------- basic ops

def scalar_add(a: Tensor, s: float) -> Tensor:
    data = a.data + s

    def backward(g):
        _accumulate(a, g)

    return _make(data, (a,), backward)


def scalar_mul(a: Tensor, s: float) -> Tensor:
    data = a.data * s

    def backward(g):
        _accumulate(a, g * s)

    return _make(data, (a,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data @ b.data

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        _accumulate(a, g * data)

    return _make(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(g):
        _accumulate(a, g / a.data)

    return _make(data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - data * data))

    return _make(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward(g):
        _accumulate(a, g * (a.data > 0))

    return _make(data, (a,), backward)


def softplus(a: Tensor) -> Tensor:
    # log(1 + e^x) via logaddexp; derivative is the logistic sigmoid
    data = np.logaddexp(0.0, a.data)

    def backward(g):
        _accumulate(a, g / (1.0 + np.exp(-a.data)))

    return _make(data, (a,), backward)


def square(a: Tensor) -> Tensor:
    data = a.data * a.data

    def backward(g):
        _accumulate(a, g * 2.0 * a.data)

    return _make(data, (a,), backward)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(gg, a.data.shape).copy())

    return _make(data, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(data, (a,), backward)


def concat(tensors, axis: int = 1) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        pieces = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        for t, piece in zip(tensors, pieces):
            _accumulate(t, piece)

    return _make(data, tuple(tensors), backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    data = np.minimum(a.data, b.data)
    take_a = a.data <= b.data  # ties route to the first argument

    def backward(g):
        _accumulate(a, _unbroadcast(g * take_a, a.data.shape))
        _accumulate(b, _unbroadcast(g * ~take_a, b.data.shape))

    return _make(data, (a, b), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        _accumulate(a, g * inside)

    return _make(data, (a,), backward)


def log_softmax(a: Tensor, axis: int = 1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    data = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        soft = np.exp(data)
        _accumulate(a, g - soft * g.sum(axis=axis, keepdims=True))

    return _make(data, (a,), backward)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """out[n] = a[n, idx[n]] for a 2-d tensor."""
    rows = np.arange(a.data.shape[0])
    data = a.data[rows, idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (rows, idx), g)
        _accumulate(a, full)

    return _make(data, (a,), backward)


def conv2d(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """Valid-mode cross-correlation: x (N,C,H,W), w (F,C,kh,kw) -> (N,F,Ho,Wo)."""
    n, c, h, wd = x.data.shape
    f, c2, kh, kw = w.data.shape
    if c != c2:
        raise ConfigError(f"conv2d channel mismatch: input {c}, kernel {c2}")
    if kh > h or kw > wd:
        raise ConfigError(f"kernel {kh}x{kw} larger than input {h}x{wd}")
    win = np.lib.stride_tricks.sliding_window_view(x.data, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    data = np.einsum("nchwpq,fcpq->nfhw", win, w.data, optimize=True)
    ho, wo = data.shape[2], data.shape[3]

    def backward(g):
        if w.requires_grad:
            _accumulate(w, np.einsum("nfhw,nchwpq->fcpq", g, win, optimize=True))
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            for p in range(kh):
                for q in range(kw):
                    # every output pixel (i,j) reads input (i*stride+p, j*stride+q)
                    contrib = np.tensordot(g, w.data[:, :, p, q], axes=([1], [0]))
                    contrib = np.moveaxis(contrib, -1, 1)
                    gx[:, :, p : p + stride * (ho - 1) + 1 : stride,
                       q : q + stride * (wo - 1) + 1 : stride] += contrib
            _accumulate(x, gx)

    return _make(data, (x, w), backward)


# ------------------------------------------------------------------- modules

class Module:
    """Base: parameter discovery by attribute walk (insertion order), freeze
    support.  Attribute order is construction order, so two instances built by
    the same code list parameters in the same order."""

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name in vars(self):
            v = getattr(self, name)
            key = f"{prefix}{name}"
            if isinstance(v, Tensor) and v.is_param:
                out[key] = v
            elif isinstance(v, Module):
                out.update(v.named_parameters(prefix=f"{key}."))
            elif isinstance(v, (list, tuple)):
                for i, item in enumerate(v):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(prefix=f"{key}.{i}."))
        return out

    def load_state(self, named: dict[str, np.ndarray], prefix: str = ""):
        """Copy arrays into parameters by name; missing/extra names error."""
        own = self.named_parameters()
        for key, p in own.items():
            src = named.get(prefix + key)
            if src is None:
                raise ConfigError(f"checkpoint missing parameter {prefix + key!r}")
            if src.shape != p.data.shape:
                raise ConfigError(
                    f"checkpoint shape {src.shape} != model shape {p.data.shape} for {key!r}"
                )
            p.data = src.astype(p.data.dtype)


@contextmanager
def frozen(*modules: Module):
    """Run forward passes with these modules' parameters held constant.

    Ops built inside the block record no edges to the frozen parameters, so a
    later backward() cannot deposit gradient into them.
    """
    ps = [p for m in modules for p in m.parameters()]
    saved = [p.requires_grad for p in ps]
    for p in ps:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, s in zip(ps, saved):
            p.requires_grad = s


def _param(data: np.ndarray) -> Tensor:
    t = Tensor(data, requires_grad=True)
    t.is_param = True
    return t


def glorot_normal(rng, shape, fan_in: int, fan_out: int, dtype=np.float32) -> np.ndarray:
    std = math.sqrt(2.0 / (fan_in + fan_out))
    n = int(np.prod(shape))
    draws = rng.normal(n).reshape(shape) * std
    return draws.astype(dtype)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng, dtype=np.float32):
        self.weight = _param(glorot_normal(rng, (in_dim, out_dim), in_dim, out_dim, dtype))
        self.bias = _param(np.zeros(out_dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int, rng, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        fan_out = out_ch * kernel * kernel
        self.weight = _param(glorot_normal(rng, (out_ch, in_ch, kernel, kernel), fan_in, fan_out, dtype))
        self.bias = _param(np.zeros(out_ch, dtype=dtype))
        self.stride = stride

    def __call__(self, x: Tensor) -> Tensor:
        y = conv2d(x, self.weight, stride=self.stride)
        return y + reshape(self.bias, (1, -1, 1, 1))


class MLP(Module):
    """ReLU MLP; hidden may be an int or a sequence of widths."""

    def __init__(self, in_dim: int, hidden, out_dim: int, rng, dtype=np.float32):
        widths = [hidden] if isinstance(hidden, int) else list(hidden)
        dims = [in_dim] + widths + [out_dim]
        self.layers = [Linear(dims[i], dims[i + 1], rng, dtype) for i in range(len(dims) - 1)]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = relu(layer(x))
        return self.layers[-1](x)


class ConvEncoder(Module):
    """Conv stack -> flatten -> linear -> tanh latent.

    Gradient flows wherever the caller lets it; RL code decides who owns the
    encoder.  ``conv_activations`` exposes post-ReLU feature maps for the
    attention analysis.
    """

    def __init__(self, in_shape, n_layers: int = 4, filters: int = 32, kernel: int = 3,
                 strides=None, latent_dim: int = 50, rng=None, dtype=np.float32):
        c, h, w = in_shape
        if rng is None:
            rng = RngStream(0).substream(stage=0, n_elements=1)
        if strides is None:
            strides = [2] + [1] * (n_layers - 1)
        if len(strides) != n_layers:
            raise ConfigError(f"{n_layers} layers need {n_layers} strides, got {len(strides)}")
        self.convs = []
        ch = c
        hh, ww = h, w
        for i in range(n_layers):
            self.convs.append(Conv2d(ch, filters, kernel, strides[i], rng, dtype))
            hh = (hh - kernel) // strides[i] + 1
            ww = (ww - kernel) // strides[i] + 1
            if hh < 1 or ww < 1:
                raise ConfigError(f"encoder layer {i} shrinks {h}x{w} input below 1x1")
            ch = filters
        self.flat_dim = ch * hh * ww
        self.head = Linear(self.flat_dim, latent_dim, rng, dtype)
        self.latent_dim = latent_dim
        self.in_shape = tuple(in_shape)

    def conv_activations(self, x: Tensor) -> list[Tensor]:
        acts = []
        for conv in self.convs:
            x = relu(conv(x))
            acts.append(x)
        return acts

    def __call__(self, x: Tensor) -> Tensor:
        acts = self.conv_activations(x)
        flat = reshape(acts[-1], (x.data.shape[0], self.flat_dim))
        return tanh(self.head(flat))


LOG_STD_LO = -10.0
LOG_STD_HI = 2.0


class GaussianTanhHead(Module):
    """Squashed-Gaussian policy head: trunk feature -> (mean, bounded log_std).

    ``sample`` uses reparameterized noise supplied by the caller so the draw
    is part of the deterministic update contract, not hidden state.
    """

    def __init__(self, in_dim: int, action_dim: int, rng, dtype=np.float32):
        self.mean_lin = Linear(in_dim, action_dim, rng, dtype)
        self.std_lin = Linear(in_dim, action_dim, rng, dtype)
        self.action_dim = action_dim

    def _log_std(self, h: Tensor) -> Tensor:
        raw = self.std_lin(h)
        return LOG_STD_LO + 0.5 * (LOG_STD_HI - LOG_STD_LO) * (tanh(raw) + 1.0)

    def sample(self, h: Tensor, noise: np.ndarray) -> tuple[Tensor, Tensor]:
        """Return (action in (-1,1)^m, per-element log-prob).

        log p(a) = sum_dims [ -eps^2/2 - log_std - log sqrt(2 pi)
                              - 2 (log 2 - u - softplus(-2u)) ]
        the last line is the stable tanh change-of-variables term.
        """
        mean = self.mean_lin(h)
        log_std = self._log_std(h)
        eps = Tensor(noise.astype(mean.data.dtype))
        u = mean + exp(log_std) * eps
        action = tanh(u)
        gauss = -0.5 * square(eps) - log_std - 0.5 * math.log(2.0 * math.pi)
        corr = 2.0 * (math.log(2.0) - u - softplus(-2.0 * u))
        log_prob = tsum(gauss - corr, axis=1)
        return action, log_prob

    def mean_action(self, h: Tensor) -> Tensor:
        return tanh(self.mean_lin(h))


class CategoricalHead(Module):
    """Discrete policy head: logits, log-probs, entropy; sampling is external."""

    def __init__(self, in_dim: int, n_actions: int, rng, dtype=np.float32):
        self.lin = Linear(in_dim, n_actions, rng, dtype)
        self.n_actions = n_actions

    def log_probs(self, h: Tensor) -> Tensor:
        return log_softmax(self.lin(h), axis=1)

    def entropy(self, log_probs: Tensor) -> Tensor:
        return -tsum(exp(log_probs) * log_probs, axis=1)


# ----------------------------------------------------------------- optimizer

class Adam:
    """Standard Adam with bias correction; one instance per parameter group."""

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * (g * g)
            mhat = self.m[i] / (1.0 - self.b1 ** self.t)
            vhat = self.v[i] / (1.0 - self.b2 ** self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def ema_update(target_params, online_params, tau: float):
    """theta_target <- tau * theta_online + (1 - tau) * theta_target."""
    for t, o in zip(target_params, online_params):
        t.data = tau * o.data + (1.0 - tau) * t.data


# --------------------------------------------------------------- checkpoints

CKPT_MAGIC = "stackaug-ckpt"
CKPT_VERSION = 1


def save_params(path, named: dict[str, np.ndarray]):
    """Versioned text header then named little-endian blobs, header order."""
    items = []
    for name, arr in named.items():
        if any(ch.isspace() for ch in name):
            raise ConfigError(f"parameter name {name!r} contains whitespace")
        a = np.asarray(arr.data if isinstance(arr, Tensor) else arr)
        if a.dtype == np.float64:
            a = a.astype("<f8")
        elif a.dtype == np.float32:
            a = a.astype("<f4")
        elif a.dtype == np.int64:
            a = a.astype("<i8")
        else:
            raise ConfigError(f"unsupported checkpoint dtype {a.dtype} for {name!r}")
        items.append((name, a))
    with open(path, "wb") as fh:
        fh.write(f"{CKPT_MAGIC} {CKPT_VERSION} {len(items)}\n".encode("ascii"))
        for name, a in items:
            tag = {"float32": "f4", "float64": "f8", "int64": "i8"}[a.dtype.name]
            dims = " ".join(str(d) for d in a.shape)
            fh.write(f"{name} {tag} {a.ndim} {dims}\n".rstrip().encode("ascii") + b"\n")
        for _, a in items:
            fh.write(np.ascontiguousarray(a).tobytes())


def load_params(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.readline().decode("ascii").split()
        if len(head) != 3 or head[0] != CKPT_MAGIC:
            raise ConfigError(f"{path}: not a {CKPT_MAGIC} file")
        if int(head[1]) != CKPT_VERSION:
            raise ConfigError(f"{path}: unsupported version {head[1]}")
        count = int(head[2])
        metas = []
        for _ in range(count):
            parts = fh.readline().decode("ascii").split()
            name, tag, ndim = parts[0], parts[1], int(parts[2])
            shape = tuple(int(x) for x in parts[3 : 3 + ndim])
            metas.append((name, tag, shape))
        out = {}
        for name, tag, shape in metas:
            dt = np.dtype("<" + tag)
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(n * dt.itemsize)
            if len(raw) != n * dt.itemsize:
                raise ConfigError(f"{path}: truncated blob for {name!r}")
            out[name] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    return out
