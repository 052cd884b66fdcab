"""Checkpoint evaluation: per-sample metrics CSV plus per-bin summary."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import data, metrics
from .errors import ConfigError
from .network import composite
from .tensor import Tensor, no_grad

EVAL_COLUMNS = ("sample_id", "bin", "l1_pct", "psnr", "ssim")
SUMMARY_COLUMNS = ("bin", "count", "l1_pct", "psnr", "ssim")


def _mask_paths(mask_dir):
    paths = sorted(
        p
        for p in Path(mask_dir).iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not paths:
        raise ConfigError(f"mask_dir {mask_dir} holds no mask images")
    return paths


def evaluate(generator, image_size, manifest, mask_dir, identity=False, mask_invert=False):
    """Run metrics over a manifest; masks are paired cyclically by index.

    With ``identity`` the model is bypassed and the ground truth scored
    against itself (pipeline check). Metrics are computed on the [0,1]
    scale over the composited image.
    """
    entries = data.read_manifest(manifest)
    masks = _mask_paths(mask_dir)
    rows = []
    for idx, path in enumerate(entries):
        gt = data.load_image(path, image_size)
        mask = data.load_mask(masks[idx % len(masks)], image_size, invert=mask_invert)
        if identity:
            comp = gt
        else:
            corrupted = Tensor(gt.data[None] * mask.data[None])
            with no_grad():
                pred, _ = generator(corrupted, Tensor(mask.data[None]))
                comp3 = composite(corrupted, pred, Tensor(mask.data[None]))
            comp = Tensor(comp3.data[0])
        a = metrics.to_unit_range(gt)
        b = metrics.to_unit_range(comp)
        rows.append(
            {
                "sample_id": Path(path).stem,
                "bin": data.ratio_bin(mask),
                "l1_pct": metrics.mean_l1_percent(a, b),
                "psnr": metrics.psnr(a, b),
                "ssim": metrics.ssim(a, b),
            }
        )
    return rows


def summarize(rows):
    """Per-bin means in the standard bin order; empty bins stay 'NA'."""
    summary = []
    for bin_name in data.RATIO_BINS:
        members = [r for r in rows if r["bin"] == bin_name]
        if not members:
            summary.append(
                {"bin": bin_name, "count": 0, "l1_pct": "NA", "psnr": "NA", "ssim": "NA"}
            )
            continue
        summary.append(
            {
                "bin": bin_name,
                "count": len(members),
                "l1_pct": float(np.mean([r["l1_pct"] for r in members])),
                "psnr": float(np.mean([r["psnr"] for r in members])),
                "ssim": float(np.mean([r["ssim"] for r in members])),
            }
        )
    return summary


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def write_eval_csv(rows, summary, out_csv):
    """Write the per-sample CSV and a ``*_summary.csv`` next to it."""
    out = Path(out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in EVAL_COLUMNS])
    summary_path = out.with_name(out.stem + "_summary.csv")
    with summary_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for r in summary:
            writer.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])
    return str(out), str(summary_path)
