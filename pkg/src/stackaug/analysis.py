"""Attention maps, augmentation previews, pairwise ablations, and benchmarks."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import apply, apply_naive, kind_name, run_pipeline, sample_plan
from .errors import ConfigError
from .imagecore import PixelBatch, to_byte, write_ppm
from .rng import RngStream


# ---------------------------------------------------------------- attention

def spatial_attention(activations: np.ndarray) -> np.ndarray:
    """Spatial attention map of one (C, H, W) activation block.

    Channel-mean of absolute values followed by a softmax over all H*W
    positions.  The result is nonnegative, sums to 1, and has the same
    spatial dims as the input.
    """
    a = np.asarray(activations, dtype=np.float64)
    if a.ndim != 3:
        raise ConfigError(f"expected (C,H,W) activations, got shape {a.shape}")
    pooled = np.mean(np.abs(a), axis=0)
    flat = pooled.reshape(-1)
    e = np.exp(flat - flat.max())
    return (e / e.sum()).reshape(pooled.shape)


# ---------------------------------------------------------------- benchmark

@dataclass
class BenchRow:
    kind: str
    batched_items_per_sec: float
    naive_items_per_sec: float
    speedup: float
    ns_per_frame: float
    minutes_per_100k: float


@dataclass
class BenchReport:
    """Timing rows plus the workload they were measured on.

    The extrapolation is pure arithmetic: one training step augments one
    minibatch of B elements, so
        minutes_per_100k = (batched seconds per iteration) * 100000 / 60.
    """

    b: int
    s: int
    c: int
    h: int
    w: int
    iterations: int
    repeats: int
    workers: int
    rows: list = field(default_factory=list)

    def table(self) -> str:
        head = ["kind", "batched items/s", "naive items/s", "speedup",
                "ns/frame", "min/100k steps"]
        cells = [head] + [
            [r.kind, f"{r.batched_items_per_sec:.1f}", f"{r.naive_items_per_sec:.1f}",
             f"{r.speedup:.2f}x", f"{r.ns_per_frame:.0f}", f"{r.minutes_per_100k:.2f}"]
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in cells) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                 for row in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        wl = f"workload: B={self.b} S={self.s} C={self.c} {self.h}x{self.w}, " \
             f"{self.iterations} iterations, {self.repeats} repeats, {self.workers} workers"
        return wl + "\n" + "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({
            "workload": {"b": self.b, "s": self.s, "c": self.c, "h": self.h,
                         "w": self.w, "iterations": self.iterations,
                         "repeats": self.repeats, "workers": self.workers},
            "rows": [vars(r) for r in self.rows],
        }, indent=2)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "batched_items_per_sec", "naive_items_per_sec",
                        "speedup", "ns_per_frame", "minutes_per_100k",
                        "b", "s", "c", "h", "w", "iterations", "repeats", "workers"])
            for r in self.rows:
                w.writerow([r.kind, f"{r.batched_items_per_sec:.6g}",
                            f"{r.naive_items_per_sec:.6g}", f"{r.speedup:.6g}",
                            f"{r.ns_per_frame:.6g}", f"{r.minutes_per_100k:.6g}",
                            self.b, self.s, self.c, self.h, self.w,
                            self.iterations, self.repeats, self.workers])


def _bench_batch(b, s, c, h, w) -> PixelBatch:
    raw = RngStream(2024).substream(stage=0, n_elements=b * s * c * h * w).uniform1()
    data = (raw.reshape(b, s, c, h, w) * 256.0).astype(np.uint8)
    return PixelBatch(data)


def _time_once(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def run_bench(kinds, b: int = 128, s: int = 3, c: int = 3, h: int = 100, w: int = 100,
              iterations: int = 10, repeats: int = 3, workers: int = 1) -> BenchReport:
    """Median-of-repeats timing of each kind's batched kernel vs the
    per-image naive loop on one fixed synthetic workload."""
    if iterations < 1:
        raise ConfigError(f"benchmark needs iterations >= 1, got {iterations}")
    if repeats < 1:
        raise ConfigError(f"benchmark needs repeats >= 1, got {repeats}")
    if not kinds:
        raise ConfigError("benchmark needs at least one augmentation kind")
    batch = _bench_batch(b, s, c, h, w)
    report = BenchReport(b=b, s=s, c=c, h=h, w=w, iterations=iterations,
                         repeats=repeats, workers=workers)

    for kind in kinds:
        plans = [sample_plan(kind, batch.shape, RngStream(it), stage=0)
                 for it in range(iterations)]

        def run_batched():
            for plan in plans:
                apply(batch, kind, plan, workers=workers)

        def run_naive():
            for plan in plans:
                apply_naive(batch, kind, plan)

        t_batched = float(np.median([_time_once(run_batched) for _ in range(repeats)]))
        t_naive = float(np.median([_time_once(run_naive) for _ in range(repeats)]))
        per_iter = t_batched / iterations
        report.rows.append(BenchRow(
            kind=kind_name(kind),
            batched_items_per_sec=b * iterations / t_batched,
            naive_items_per_sec=b * iterations / t_naive,
            speedup=t_naive / t_batched,
            ns_per_frame=per_iter / (b * s) * 1e9,
            minutes_per_100k=per_iter * 100_000 / 60.0,
        ))
    return report


# ----------------------------------------------------------------- ablation

# fixed anchor colors, interpolated to 256 entries; constants keep heatmap
# bytes identical across runs and machines
_CMAP_ANCHORS = np.array([
    [13, 8, 135],
    [84, 2, 163],
    [156, 23, 158],
    [205, 62, 113],
    [237, 121, 83],
    [253, 180, 47],
    [240, 249, 33],
], dtype=np.float64)


def _colormap() -> np.ndarray:
    xs = np.linspace(0.0, 1.0, 256)
    anchor_pos = np.linspace(0.0, 1.0, len(_CMAP_ANCHORS))
    out = np.empty((256, 3), dtype=np.uint8)
    for ch in range(3):
        vals = np.interp(xs, anchor_pos, _CMAP_ANCHORS[:, ch])
        out[:, ch] = np.floor(vals + 0.5).astype(np.uint8)
    return out


_CMAP = _colormap()


def heatmap_ppm(matrix: np.ndarray, path, cell: int = 24):
    """Render a small matrix as a PPM heatmap with cell*cell pixel blocks."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ConfigError(f"heatmap needs a 2-d matrix, got shape {m.shape}")
    lo, hi = float(m.min()), float(m.max())
    span = hi - lo if hi > lo else 1.0
    idx = np.floor((m - lo) / span * 255.0 + 0.5).astype(np.int64)
    rgb = _CMAP[np.clip(idx, 0, 255)]            # (R, C, 3)
    img = np.repeat(np.repeat(rgb, cell, axis=0), cell, axis=1)
    write_ppm(path, np.ascontiguousarray(img.transpose(2, 0, 1)))


def ablation_grid(kinds, train_fn, out_csv=None, out_ppm=None):
    """Mean return for every ordered pair of augmentations, identity included.

    ``train_fn(pipeline) -> float`` runs one desk-scale training job; the
    grid row/column 0 is the identity (no augmentation), so the matrix is
    (k+1) x (k+1) and cell (0, 0) is the unaugmented baseline.
    """
    options: list = [None] + list(kinds)
    names = ["identity"] + [kind_name(k) for k in kinds]
    n = len(options)
    grid = np.zeros((n, n), dtype=np.float64)
    for i, first in enumerate(options):
        for j, second in enumerate(options):
            pipeline = [k for k in (first, second) if k is not None]
            grid[i, j] = float(train_fn(pipeline))
    if not np.all(np.isfinite(grid)):
        raise ConfigError("ablation produced non-finite returns")
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["first\\second"] + names)
            for i, name in enumerate(names):
                w.writerow([name] + [f"{v:.6g}" for v in grid[i]])
    if out_ppm is not None:
        heatmap_ppm(grid, out_ppm)
    return grid, names


# ------------------------------------------------------------------ preview

def preview(batch: PixelBatch, pipeline, seed: int, out_dir) -> list:
    """Run the pipeline and write one PPM per (element, frame).

    Same seed, same inputs -> byte-identical files.  Returns the paths.
    """
    out = run_pipeline(batch, pipeline, seed=seed)
    if not out.is_byte:
        out = to_byte(out)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for b in range(out.batch):
        for s in range(out.stack):
            p = out_dir / f"element{b:03d}_frame{s:02d}.ppm"
            write_ppm(p, out.frame(b, s))
            paths.append(p)
    return paths
