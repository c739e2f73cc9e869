"""Canonical image batch container, color conversions, and byte-exact I/O.

The whole package speaks one layout: ``(B, S, C, H, W)`` — batch, stacked
frames per observation, channels, rows, columns — contiguous and B-major so an
augmentation can sweep one batch element's full frame stack with unit-stride
inner loops.

Two dtypes exist: ``byte`` (uint8, values 0..255) and ``real`` (float32 or
float64, values in [0, 1]).  ``to_byte`` quantizes round-half-up so that
byte -> real -> byte is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

BT601_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

BATCH_MAGIC = "stackaug-batch"
BATCH_VERSION = 1


@dataclass
class PixelBatch:
    """A batch of stacked-frame image observations.

    ``data`` has shape (B, S, C, H, W).  Byte batches are uint8; real batches
    are float32/float64 with every element in [0, 1].
    """

    data: np.ndarray

    def __post_init__(self):
        a = self.data
        if a.ndim != 5:
            raise ConfigError(f"PixelBatch needs 5 dims (B,S,C,H,W), got shape {a.shape}")
        b, s, c, h, w = a.shape
        if min(b, s, h, w) < 1:
            raise ConfigError(f"B,S,H,W must be >= 1, got {a.shape}")
        if c not in (1, 3):
            raise ConfigError(f"channel count must be 1 or 3, got {c}")
        if a.dtype == np.uint8:
            pass
        elif a.dtype in (np.float32, np.float64):
            if a.size and (a.min() < 0.0 or a.max() > 1.0):
                raise ConfigError("real PixelBatch values must lie in [0, 1]")
        else:
            raise ConfigError(f"unsupported dtype {a.dtype}; use uint8/float32/float64")
        if not a.flags.c_contiguous:
            self.data = np.ascontiguousarray(a)

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def stack(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[3]

    @property
    def width(self) -> int:
        return self.data.shape[4]

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        return self.data.shape

    @property
    def is_byte(self) -> bool:
        return self.data.dtype == np.uint8

    def frame(self, b: int, s: int) -> np.ndarray:
        """Writable (C, H, W) view of one frame; aliasing never reshapes the batch."""
        if not (0 <= b < self.batch and 0 <= s < self.stack):
            raise ConfigError(f"frame index ({b},{s}) out of range for {self.shape[:2]}")
        return self.data[b, s]

    def copy(self) -> "PixelBatch":
        return PixelBatch(self.data.copy())


def to_real(batch: PixelBatch, dtype=np.float32) -> PixelBatch:
    """byte -> real: v / 255, shape preserved."""
    if not batch.is_byte:
        raise ConfigError("to_real expects a byte batch")
    return PixelBatch((batch.data.astype(dtype) / dtype(255.0)).astype(dtype))


def to_byte(batch: PixelBatch) -> PixelBatch:
    """real -> byte: round-half-up of v*255; out-of-range input is an error."""
    if batch.is_byte:
        raise ConfigError("to_byte expects a real batch")
    v = batch.data
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ConfigError("to_byte input must lie in [0, 1]")
    return PixelBatch(np.floor(v.astype(np.float64) * 255.0 + 0.5).astype(np.uint8))


def _check_rgb(frame: np.ndarray):
    if frame.ndim < 3 or frame.shape[-3] != 3:
        raise ConfigError(f"expected (..., 3, H, W), got shape {frame.shape}")


def rgb_to_hsv(frame: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV on (..., 3, H, W) real arrays; all channels in [0, 1].

    H uses the usual sextant formula scaled to [0, 1); S = 0 where V = 0;
    achromatic pixels get H = 0 by convention.  Computed in float64 so the
    round trip stays within 1e-6 regardless of input precision.
    """
    _check_rgb(frame)
    rgb = np.asarray(frame, dtype=np.float64)
    r, g, b = rgb[..., 0, :, :], rgb[..., 1, :, :], rgb[..., 2, :, :]
    v = np.max(rgb, axis=-3)
    mn = np.min(rgb, axis=-3)
    delta = v - mn
    safe_delta = np.where(delta > 0, delta, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe_delta) % 6.0,
        np.where(v == g, (b - r) / safe_delta + 2.0, (r - g) / safe_delta + 4.0),
    )
    h = np.where(delta > 0, h / 6.0, 0.0)
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    out = np.stack([h, s, v], axis=-3)
    return out.astype(frame.dtype) if frame.dtype != np.float64 else out


def hsv_to_rgb(frame: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_hsv on (..., 3, H, W); outputs in [0, 1]."""
    _check_rgb(frame)
    hsv = np.asarray(frame, dtype=np.float64)
    h, s, v = hsv[..., 0, :, :], hsv[..., 1, :, :], hsv[..., 2, :, :]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6)
    f = h6 - i
    i = i.astype(np.int64) % 6
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    out = np.clip(np.stack([r, g, b], axis=-3), 0.0, 1.0)
    return out.astype(frame.dtype) if frame.dtype != np.float64 else out


def rgb_to_gray(frame: np.ndarray) -> np.ndarray:
    """BT.601 luma on (..., 3, H, W) -> (..., 1, H, W); bytes stay bytes."""
    _check_rgb(frame)
    y = np.tensordot(
        np.moveaxis(np.asarray(frame, dtype=np.float64), -3, -1), BT601_WEIGHTS, axes=1
    )
    y = y[..., None, :, :]
    if np.asarray(frame).dtype == np.uint8:
        return np.floor(y + 0.5).astype(np.uint8)
    return y.astype(frame.dtype) if frame.dtype != np.float64 else y


# ---------------------------------------------------------------------------
# File formats: PPM (P6) per frame, raw little-endian dump per batch.
# ---------------------------------------------------------------------------

def write_ppm(path, frame: np.ndarray):
    """Write one (C, H, W) byte frame as binary PPM (P6, maxval 255).

    C=1 frames are replicated to three channels so the file is always P6.
    """
    f = np.asarray(frame)
    if f.ndim != 3 or f.shape[0] not in (1, 3):
        raise ConfigError(f"write_ppm expects (C,H,W) with C in {{1,3}}, got {f.shape}")
    if f.dtype != np.uint8:
        raise ConfigError("write_ppm expects byte pixels; convert with to_byte first")
    if f.shape[0] == 1:
        f = np.repeat(f, 3, axis=0)
    h, w = f.shape[1], f.shape[2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(np.moveaxis(f, 0, -1)).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM (P6, maxval 255) into a (3, H, W) byte array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P6" or fields[3] != b"255":
        raise ConfigError(f"{path}: not a P6/maxval-255 PPM")
    w, h = int(fields[1]), int(fields[2])
    raw = np.frombuffer(blob, dtype=np.uint8, count=w * h * 3, offset=pos)
    return np.moveaxis(raw.reshape(h, w, 3), -1, 0).copy()


def write_batch(path, batch: PixelBatch):
    """Dump a batch: one 8-field text header line, then the raw buffer.

    Header fields: magic, version, B, S, C, H, W, dtype(byte|real).  Payload is
    the C-order buffer, uint8 for byte batches and little-endian float32 for
    real batches (float64 data is cast down).
    """
    b, s, c, h, w = batch.shape
    tag = "byte" if batch.is_byte else "real"
    payload = batch.data if batch.is_byte else batch.data.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(f"{BATCH_MAGIC} {BATCH_VERSION} {b} {s} {c} {h} {w} {tag}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(payload).tobytes())


def read_batch(path) -> PixelBatch:
    """Read a batch written by write_batch."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise ConfigError(f"cannot read batch file {path}: {exc}")
    with fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 8 or header[0] != BATCH_MAGIC:
            raise ConfigError(f"{path}: not a {BATCH_MAGIC} file")
        if int(header[1]) != BATCH_VERSION:
            raise ConfigError(f"{path}: unsupported version {header[1]}")
        b, s, c, h, w = (int(x) for x in header[2:7])
        tag = header[7]
        if tag not in ("byte", "real"):
            raise ConfigError(f"{path}: unknown dtype tag {tag!r}")
        dt = np.dtype(np.uint8) if tag == "byte" else np.dtype("<f4")
        n = b * s * c * h * w
        raw = fh.read(n * dt.itemsize)
        if len(raw) != n * dt.itemsize:
            raise ConfigError(f"{path}: truncated payload")
    arr = np.frombuffer(raw, dtype=dt).reshape(b, s, c, h, w)
    return PixelBatch(arr.astype(np.float32) if tag == "real" else arr.copy())
