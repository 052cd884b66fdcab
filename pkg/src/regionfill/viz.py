"""Region-mask image export: per-region grayscale maps and an argmax map."""

from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np
from PIL import Image


def region_palette(n):
    """Fixed n-color palette (uint8 RGB rows), deterministic in n."""
    colors = []
    for i in range(n):
        r, g, b = colorsys.hsv_to_rgb(i / max(n, 1), 0.85, 0.95)
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    return np.array(colors, dtype=np.uint8)


def _to_gray(channel, normalize=False):
    arr = np.asarray(channel, dtype=np.float64)
    if normalize:
        lo, hi = arr.min(), arr.max()
        arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    return np.clip(arr * 255.0, 0, 255).round().astype(np.uint8)


def export_region_maps(region_mask, out_dir, prefix="region"):
    """Write 2n+1 PNGs for a RegionMask: n probability maps ([0,1] scaled
    straight to [0,255]), n coarse maps (min-max normalized, they are raw
    linear outputs), and one palette-colored argmax map. Uses the first
    batch item. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    values = region_mask.values.data[0]
    coarse = region_mask.coarse.data[0]
    n = values.shape[0]
    paths = []
    for i in range(n):
        p = out / f"{prefix}_rm_{i:02d}.png"
        Image.fromarray(_to_gray(values[i]), mode="L").save(p, format="PNG")
        paths.append(p)
    for i in range(n):
        p = out / f"{prefix}_coarse_{i:02d}.png"
        Image.fromarray(_to_gray(coarse[i], normalize=True), mode="L").save(p, format="PNG")
        paths.append(p)
    palette = region_palette(n)
    argmax = values.argmax(axis=0)
    p = out / f"{prefix}_argmax.png"
    Image.fromarray(palette[argmax], mode="RGB").save(p, format="PNG")
    paths.append(p)
    return [str(p) for p in paths]
