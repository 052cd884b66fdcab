"""Complexity benchmark: region attention vs patch attention.

Closed-form flop models mirror the exact cost model charged by the ops
(see tensor.py/ops.py), so instrumented counter totals must match the
analytic numbers exactly; wall-clock is recorded for reference. Fitted
log-log slopes against pixel count expose the linear-vs-quadratic gap.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .region import RaConfig, RegionAttention, cam_forward
from .tensor import Tensor, flop_count, no_grad, reset_flops


def ra_flops(b, c, h, w, n, r=4, proj_kernel=5, refine_kernel=3):
    """Forward flops of region attention (eval-mode normalization)."""
    hw = h * w
    m = (h // r) * (w // r)
    total = 0
    total += 2 * b * n * hw * c * proj_kernel**2 + b * n * hw  # projection conv
    total += b * n * hw + b * n * m  # average downsample
    total += 2 * (b * n) * m * m + b * n * m  # shared linear (matmul + bias)
    total += 4 * b * n * h * (w // r) + 4 * b * n * hw  # bilinear upsample
    total += 2 * b * n * hw * n * refine_kernel**2 + b * n * hw  # refine conv
    total += 4 * b * n * hw  # batchnorm (eval affine)
    total += 5 * b * n * hw  # channel softmax
    total += 2 * b * hw * n * c  # dictionary mixture
    total += b * c * hw  # residual add
    return total


def cam_flops(b, c, h, w, patch=3, contexts=None):
    """Forward flops of patch attention with all-valid context windows.

    Reflect padding puts one window on every pixel, so both the query
    count and (for a hole-free mask) the context count equal h·w.
    """
    p = patch
    k = h * w
    kc = k if contexts is None else contexts
    d = c * p * p
    per_item = 0
    per_item += 3 * k * d + 2 * k  # patch normalization
    per_item += 2 * k * d * kc  # cosine scores
    per_item += k * kc  # temperature scale
    per_item += 5 * k * kc  # softmax over contexts
    per_item += 2 * k * kc * d  # mixture of context patches
    per_item += k * d  # overlap-add fold
    per_item += c * h * w  # coverage normalization
    return b * per_item


@dataclass
class BenchRow:
    size: int
    pixels: int
    ra_flops_analytic: int
    ra_flops_measured: int
    ra_seconds: float
    cam_flops_analytic: int
    cam_flops_measured: int
    cam_seconds: float


@dataclass
class BenchResult:
    rows: list = field(default_factory=list)
    n: int = 16
    channels: int = 32
    patch: int = 3

    @property
    def ra_slope(self):
        return _loglog_slope([r.pixels for r in self.rows], [r.ra_flops_measured for r in self.rows])

    @property
    def cam_slope(self):
        return _loglog_slope(
            [r.pixels for r in self.rows], [r.cam_flops_measured for r in self.rows]
        )


def _loglog_slope(xs, ys):
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def run_benchmark(sizes, n=16, channels=32, patch=3, r=4, seed=0):
    """Measure instrumented flops and wall-clock over a feature-size grid."""
    result = BenchResult(n=n, channels=channels, patch=patch)
    rng = np.random.default_rng(seed)
    for size in sizes:
        attention = RegionAttention(channels, size, RaConfig(n=n, r=r), rng)
        attention.eval()
        x = Tensor(rng.normal(size=(1, channels, size, size)).astype(np.float32))
        ones = Tensor(np.ones((1, 1, size, size), dtype=np.float32))

        reset_flops()
        t0 = time.perf_counter()
        with no_grad():
            attention(x)
        ra_seconds = time.perf_counter() - t0
        ra_measured = flop_count()

        reset_flops()
        t0 = time.perf_counter()
        with no_grad():
            cam_forward(x, ones, patch=patch)
        cam_seconds = time.perf_counter() - t0
        cam_measured = flop_count()
        reset_flops()

        result.rows.append(
            BenchRow(
                size=size,
                pixels=size * size,
                ra_flops_analytic=ra_flops(1, channels, size, size, n, r=r),
                ra_flops_measured=ra_measured,
                ra_seconds=ra_seconds,
                cam_flops_analytic=cam_flops(1, channels, size, size, patch=patch),
                cam_flops_measured=cam_measured,
                cam_seconds=cam_seconds,
            )
        )
    return result


BENCH_COLUMNS = (
    "size",
    "pixels",
    "ra_flops_analytic",
    "ra_flops_measured",
    "ra_seconds",
    "cam_flops_analytic",
    "cam_flops_measured",
    "cam_seconds",
)


def write_bench_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for row in result.rows:
            writer.writerow([getattr(row, col) for col in BENCH_COLUMNS])
