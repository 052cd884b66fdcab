"""Image and mask ingestion, procedural irregular-mask generation,
hole-ratio binning, and flip augmentation.

Conventions: images are (3,H,W) float32 in [-1,1]; masks are (1,H,W)
binary float32 with 1 marking known pixels and 0 marking holes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .tensor import Tensor

RATIO_BINS = ("10-20%", "20-30%", "30-40%", "40-50%", "other")


@dataclass
class MaskedSample:
    """A ground-truth image, its mask, and the derived corrupted image."""

    gt: Tensor
    mask: Tensor
    corrupted: Tensor
    hole_ratio: float

    def __post_init__(self):
        if not np.array_equal(self.corrupted.data, self.gt.data * self.mask.data):
            raise ValueError("corrupted image must equal gt * mask exactly")
        expected = 1.0 - float(self.mask.data.mean())
        if abs(self.hole_ratio - expected) > 1e-6:
            raise ValueError(
                f"hole_ratio {self.hole_ratio} inconsistent with mask ({expected})"
            )


def make_sample(gt, mask):
    corrupted = Tensor(gt.data * mask.data)
    return MaskedSample(gt=gt, mask=mask, corrupted=corrupted, hole_ratio=hole_ratio(mask))


def load_image(path, size):
    """Decode an RGB image, center-crop to square, resize, map to [-1,1]."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            w, h = im.size
            side = min(w, h)
            left = (w - side) // 2
            top = (h - side) // 2
            im = im.crop((left, top, left + side, top + side))
            if im.size != (size, size):
                im = im.resize((size, size), Image.BILINEAR)
            arr = np.asarray(im, dtype=np.float32)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from exc
    arr = arr.transpose(2, 0, 1) / 255.0 * 2.0 - 1.0
    return Tensor(arr.astype(np.float32))


def save_image(tensor, path):
    """Write a (3,H,W) [-1,1] tensor as an 8-bit PNG."""
    arr = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"save_image expects (3,H,W), got {arr.shape}")
    out = np.clip((arr + 1.0) * 0.5 * 255.0, 0, 255).round().astype(np.uint8)
    Image.fromarray(out.transpose(1, 2, 0)).save(path, format="PNG")


def load_mask(path, size, invert=False):
    """Load a grayscale mask, threshold at 127, return binary 1 = known.

    White pixels (above threshold) are treated as known; pass
    ``invert=True`` for datasets where white marks the hole.
    """
    try:
        with Image.open(path) as im:
            im = im.convert("L")
            if im.size != (size, size):
                im = im.resize((size, size), Image.NEAREST)
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot decode mask {path}: {exc}") from exc
    known = (arr > 127).astype(np.float32)
    if invert:
        known = 1.0 - known
    return Tensor(known[None])


def save_mask(mask, path):
    arr = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    out = (arr[0] > 0.5).astype(np.uint8) * 255
    Image.fromarray(out, mode="L").save(path, format="PNG")


def _stamp_disk(canvas, cy, cx, radius):
    h, w = canvas.shape
    y0, y1 = max(0, int(cy - radius)), min(h, int(cy + radius) + 1)
    x0, x1 = max(0, int(cx - radius)), min(w, int(cx + radius) + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    canvas[y0:y1, x0:x1] |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def _draw_stroke(holes, rng, size):
    """One random-walk brush stroke: random width, segments, and turns."""
    width = rng.integers(8, 25)
    segments = rng.integers(1, 9)
    y = rng.uniform(0, size)
    x = rng.uniform(0, size)
    angle = rng.uniform(0, 2 * np.pi)
    radius = width / 2.0
    for _ in range(segments):
        angle += rng.uniform(-np.pi / 2, np.pi / 2)
        length = rng.uniform(size / 8, size / 2)
        steps = max(2, int(length / max(1.0, radius / 2)))
        for t in np.linspace(0, 1, steps):
            _stamp_disk(holes, y + t * length * np.sin(angle), x + t * length * np.cos(angle), radius)
        y += length * np.sin(angle)
        x += length * np.cos(angle)
        y = float(np.clip(y, 0, size - 1))
        x = float(np.clip(x, 0, size - 1))


def generate_mask(seed, size, target_ratio, tolerance=0.02, max_attempts=100):
    """Procedural irregular mask with a target hole-to-image ratio.

    Draws brush strokes until the hole ratio lands within ``tolerance``
    of the target, retrying with fresh strokes on overshoot.
    Deterministic per seed. Raises after ``max_attempts`` failures.
    """
    if not 0.0 < target_ratio <= 0.6:
        raise ValueError(f"target_ratio must be in (0, 0.6], got {target_ratio}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        holes = np.zeros((size, size), dtype=bool)
        strokes = rng.integers(3, 9)
        drawn = 0
        while drawn < 64:
            _draw_stroke(holes, rng, size)
            drawn += 1
            ratio = holes.mean()
            if drawn < strokes and ratio < target_ratio - tolerance:
                continue
            if abs(ratio - target_ratio) <= tolerance:
                return Tensor((1.0 - holes).astype(np.float32)[None])
            if ratio > target_ratio + tolerance:
                break  # overshot; retry with fresh strokes
    raise ValueError(
        f"could not reach hole ratio {target_ratio}+-{tolerance} in {max_attempts} attempts"
    )


def hole_ratio(mask):
    """Fraction of hole pixels, as an exact integer-count division so
    bin-boundary comparisons against float literals behave."""
    m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    return int((m < 0.5).sum()) / m.size


def ratio_bin(mask):
    """Bin a mask by hole ratio into the standard half-open ranges."""
    r = hole_ratio(mask)
    if 0.1 <= r < 0.2:
        return "10-20%"
    if 0.2 <= r < 0.3:
        return "20-30%"
    if 0.3 <= r < 0.4:
        return "30-40%"
    if 0.4 <= r < 0.5:
        return "40-50%"
    return "other"


def augment(sample, seed):
    """Flip horizontally with probability 1/2, jointly on image and mask."""
    rng = np.random.default_rng(seed)
    if rng.random() < 0.5:
        gt = Tensor(sample.gt.data[:, :, ::-1].copy())
        mask = Tensor(sample.mask.data[:, :, ::-1].copy())
        return make_sample(gt, mask)
    return make_sample(sample.gt, sample.mask)


def read_manifest(path):
    """Newline-delimited file paths, relative entries resolved against it."""
    manifest = Path(path)
    if not manifest.exists():
        raise FileNotFoundError(f"manifest {path} does not exist")
    entries = []
    for line in manifest.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        if not p.is_absolute():
            p = manifest.parent / p
        entries.append(p)
    if not entries:
        raise ValueError(f"manifest {path} lists no files")
    return entries
