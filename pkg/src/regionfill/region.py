"""Region attention: mask generator, learnable region dictionary, and the
patch-matching attention baseline used for ablations and benchmarks.

The attention reconstructs each pixel's feature as a probability-weighted
mixture of learned region prototypes instead of comparing pixel pairs,
so its cost grows linearly in the pixel count rather than quadratically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from . import ops
from .nn import Conv2d, BatchNorm2d, Linear, Module, Parameter
from .tensor import Tensor, add, concat, matmul, mul, reshape, take_rows, transpose


@dataclass(frozen=True)
class RaConfig:
    """Region attention hyperparameters."""

    n: int = 16  # number of regions
    r: int = 4  # down/upsampling scale inside the mask generator
    proj_kernel: int = 5
    refine_kernel: int = 3

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("region count n must be >= 1")
        if self.r < 1:
            raise ValueError("reduction scale r must be >= 1")
        if self.refine_kernel % 2 != 1:
            raise ValueError("refine_kernel must be odd")


@dataclass
class RegionMask:
    """Per-pixel region probabilities plus the intermediate stages.

    ``values`` is the final softmax map (b,n,h,w); ``coarse`` the
    low-resolution linear prediction (b,n,h/r,w/r) kept for
    visualization; ``refined_logits`` the pre-softmax map (b,n,h,w).
    """

    values: Tensor
    coarse: Tensor
    refined_logits: Tensor

    def __post_init__(self):
        b, n, h, w = self.values.shape
        if self.refined_logits.shape != (b, n, h, w):
            raise ValueError("refined_logits shape must match values")
        cb, cn, ch, cw = self.coarse.shape
        if (cb, cn) != (b, n) or ch == 0 or cw == 0 or h % ch or w % cw:
            raise ValueError(
                f"coarse shape {self.coarse.shape} is not an integer reduction "
                f"of values shape {self.values.shape}"
            )

    @property
    def regions(self):
        return self.values.shape[1]


class RegionDictionary(Module):
    """Learnable (n, c) matrix whose rows are region feature prototypes."""

    def __init__(self, n, channels, rng, init_std=0.02):
        super().__init__()
        if n < 1 or channels < 1:
            raise ValueError("dictionary needs n >= 1 and channels >= 1")
        self.n = n
        self.channels = channels
        self.matrix = Parameter(rng.normal(0.0, init_std, size=(n, channels)))


def reconstruct_from_regions(mask_values, dictionary):
    """Mix dictionary rows per pixel: out[b,:,i,j] = sum_k RM[b,k,i,j] * D[k]."""
    d = dictionary.matrix if isinstance(dictionary, RegionDictionary) else dictionary
    b, n, h, w = mask_values.shape
    if d.shape[0] != n:
        raise ValueError(
            f"region count mismatch: mask has {n} regions, dictionary has {d.shape[0]} rows"
        )
    flat = reshape(mask_values, (b, n, h * w))
    mixed = matmul(transpose(flat, (0, 2, 1)), d)  # (b, h·w, c)
    return reshape(transpose(mixed, (0, 2, 1)), (b, d.shape[1], h, w))


class RegionAttention(Module):
    """Project -> mask generator -> dictionary mixture, with a residual add.

    The shared linear layer inside the mask generator acts on flattened
    (h/r)·(w/r) maps, so each instance is bound to one feature-map
    resolution, validated at construction and again at forward time.
    """

    def __init__(self, channels, resolution, config, rng):
        super().__init__()
        self.config = config
        self.channels = channels
        h, w = (resolution, resolution) if isinstance(resolution, int) else resolution
        r = config.r
        if h % r or w % r:
            raise ValueError(
                f"feature resolution {h}x{w} must be divisible by reduction scale r={r}"
            )
        self.resolution = (h, w)
        m = (h // r) * (w // r)
        k = config.proj_kernel
        self.project = Conv2d(channels, config.n, k, rng, padding=k // 2)
        self.shared_linear = Linear(m, m, rng)
        rk = config.refine_kernel
        self.refine = Conv2d(config.n, config.n, rk, rng, padding=rk // 2)
        self.bn = BatchNorm2d(config.n)
        self.dictionary = RegionDictionary(config.n, channels, rng)

    def project_to_regions(self, x):
        """5x5 convolution mapping c feature channels to n region channels."""
        return self.project(x)

    def generate_region_mask(self, projected):
        """Coarse per-channel linear prediction, refined and normalized.

        Pipeline: average-downsample by r, apply the one shared linear
        layer to every channel's flattened map, upsample bilinearly,
        refine with a small conv + batchnorm, then channel softmax.
        """
        b, n, h, w = projected.shape
        r = self.config.r
        if h % r or w % r:
            raise ValueError(
                f"feature map {h}x{w} not divisible by reduction scale r={r}"
            )
        down = ops.avg_down(projected, r)
        m = (h // r) * (w // r)
        flat = reshape(down, (b, n, m))
        coarse_flat = self.shared_linear(flat)  # one weight matrix, batched over channels
        coarse = reshape(coarse_flat, (b, n, h // r, w // r))
        upsampled = ops.bilinear_up(coarse, r)
        logits = self.bn(self.refine(upsampled))
        values = ops.softmax_over_channels(logits)
        return RegionMask(values=values, coarse=coarse, refined_logits=logits)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(
                f"expected (b,{self.channels},h,w) input, got {x.shape}"
            )
        if x.shape[2:] != self.resolution:
            raise ValueError(
                f"this attention instance is built for {self.resolution} maps, got "
                f"{x.shape[2:]} (the shared linear layer fixes the resolution)"
            )
        rm = self.generate_region_mask(self.project_to_regions(x))
        out = add(x, reconstruct_from_regions(rm.values, self.dictionary))
        return out, rm


# ----------------------------------------------------------------------
# patch-matching attention baseline (quadratic in pixel count)


def _valid_window_rows(mask_hw, patch):
    """Indices of reflect-padded windows fully covered by known pixels."""
    pad = patch // 2
    mp = np.pad(mask_hw, pad, mode="reflect")
    h, w = mp.shape
    oh, ow = h - patch + 1, w - patch + 1
    s0, s1 = mp.strides
    windows = as_strided(mp, (oh, ow, patch, patch), (s0, s1, s0, s1))
    full = windows.reshape(oh * ow, patch * patch).min(axis=1) >= 0.5
    return np.nonzero(full)[0]


class CamAttention(Module):
    """Cosine patch attention over valid context windows.

    The window centered on every pixel (reflect-padded at the borders)
    is a query; windows whose pixels are all known serve as contexts.
    Scores are softmaxed per query and the resulting patch mixtures are
    overlap-added, averaging by per-pixel coverage so a constant input
    reproduces exactly.
    """

    def __init__(self, patch=3, scale=10.0, chunk=2048):
        super().__init__()
        self.patch = patch
        self.scale = scale
        self.chunk = chunk

    def forward(self, x, valid_mask):
        return cam_forward(x, valid_mask, self.patch, self.scale, self.chunk)


def cam_forward(x, valid_mask, patch=3, scale=10.0, chunk=2048):
    """Patch-attention reconstruction of (b,c,h,w) features.

    ``valid_mask`` is (b,1,h,w) binary with 1 marking known pixels.
    ``patch`` must be odd so windows center on pixels. Raises when a
    batch item has no fully-valid context window.
    """
    if x.ndim != 4:
        raise ValueError(f"cam_forward expects (b,c,h,w), got {x.shape}")
    b, c, h, w = x.shape
    p = int(patch)
    if p % 2 != 1:
        raise ValueError(f"patch size must be odd, got {p}")
    if h < p or w < p:
        raise ValueError(f"input {h}x{w} smaller than patch size {p}")
    mask = valid_mask.data if isinstance(valid_mask, Tensor) else np.asarray(valid_mask)
    if mask.shape != (b, 1, h, w):
        raise ValueError(
            f"valid_mask shape {mask.shape} does not match features (expected {(b, 1, h, w)})"
        )
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError("valid_mask must be binary (1 = known)")

    pad = p // 2
    hp, wp = h + 2 * pad, w + 2 * pad
    k_all = h * w  # one window per pixel
    counts = ops.fold_counts(p, hp, wp, dtype=x.data.dtype)[
        :, pad : pad + h, pad : pad + w
    ]
    inv_counts = Tensor(1.0 / counts)
    outs = []
    for i in range(b):
        ctx_idx = _valid_window_rows(mask[i, 0], p)
        if ctx_idx.size == 0:
            raise ValueError(
                f"batch item {i} has no fully-valid {p}x{p} context window"
            )
        xi = reshape(take_rows(x, np.array([i])), (c, h, w))
        patches = ops.unfold_patches(ops.reflect_pad2d(xi, pad), p)  # (h·w, c·p·p)
        sq = (patches**2.0).sum(axis=1, keepdims=True)
        normed = patches / (sq + 1e-12) ** 0.5
        ctx_n_t = transpose(take_rows(normed, ctx_idx), (1, 0))
        ctx_raw = take_rows(patches, ctx_idx)
        pieces = []
        step = chunk or k_all
        for lo in range(0, k_all, step):
            rows = np.arange(lo, min(lo + step, k_all))
            q = take_rows(normed, rows)
            att = ops.softmax(mul(matmul(q, ctx_n_t), scale), axis=1)
            pieces.append(matmul(att, ctx_raw))
        mixed = concat(pieces, 0) if len(pieces) > 1 else pieces[0]
        folded = ops.crop2d(ops.fold_patches(mixed, p, hp, wp), pad, pad, h, w)
        outs.append(reshape(mul(folded, inv_counts), (1, c, h, w)))
    return concat(outs, 0) if len(outs) > 1 else outs[0]
