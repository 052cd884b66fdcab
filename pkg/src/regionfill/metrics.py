"""Image quality metrics on the [0,1] scale.

All functions accept numpy arrays or tensors shaped (3,H,W) or (H,W)
(plus an optional leading batch axis is not supported; evaluate per
image). Inputs in [-1,1] can be mapped with ``to_unit_range``.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .tensor import Tensor


def _as_array(x):
    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    return arr.astype(np.float64)


def to_unit_range(image):
    """Map a [-1,1] image to [0,1]."""
    return (_as_array(image) + 1.0) * 0.5


def mean_l1_percent(image_a, image_b):
    """Mean absolute difference on the [0,1] scale, as a percentage."""
    a, b = _as_array(image_a), _as_array(image_b)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean() * 100.0)


def mse(image_a, image_b):
    a, b = _as_array(image_a), _as_array(image_b)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(((a - b) ** 2).mean())


def psnr(image_a, image_b, peak=1.0):
    """10·log10(peak²/MSE); identical images give +inf."""
    err = mse(image_a, image_b)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / err))


def _gaussian_window(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(image_a, image_b, peak=1.0, window_size=11, sigma=1.5):
    """Single-scale structural similarity, channel-averaged.

    Uses the standard 11x11 Gaussian window (sigma 1.5) in valid mode
    and the constants C1=(0.01·peak)², C2=(0.03·peak)².
    """
    a, b = _as_array(image_a), _as_array(image_b)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ValueError(f"ssim expects (c,h,w) or (h,w), got {a.shape}")
    if a.shape[1] < window_size or a.shape[2] < window_size:
        raise ValueError(
            f"image {a.shape[1]}x{a.shape[2]} smaller than ssim window {window_size}"
        )
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    win = _gaussian_window(window_size, sigma)

    def filt(x):
        return convolve2d(x, win, mode="valid")

    scores = []
    for ca, cb in zip(a, b):
        mu_a = filt(ca)
        mu_b = filt(cb)
        var_a = filt(ca * ca) - mu_a * mu_a
        var_b = filt(cb * cb) - mu_b * mu_b
        cov = filt(ca * cb) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        scores.append(float((num / den).mean()))
    return float(np.mean(scores))
