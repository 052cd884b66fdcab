"""Matplotlib report figures rendered to files next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_loss_curves(history, out_png):
    """Per-term loss curves from training history rows."""
    if not history:
        return None
    steps = [row["step"] for row in history]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in ("total", "l1", "perceptual", "style", "adversarial", "d_loss"):
        values = [row.get(key, 0.0) for row in history]
        if any(v != 0.0 for v in values):
            ax.plot(steps, values, label=key)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.set_title("training losses")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)


def render_bench_figure(result, out_png):
    """Log-log flops and wall-clock for the two attention mechanisms."""
    pixels = [r.pixels for r in result.rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].loglog(pixels, [r.ra_flops_measured for r in result.rows], "o-", label="region attention")
    axes[0].loglog(pixels, [r.cam_flops_measured for r in result.rows], "s-", label="patch attention")
    axes[0].set_xlabel("pixels")
    axes[0].set_ylabel("flops")
    axes[0].set_title(
        f"flop slopes: region {result.ra_slope:.2f}, patch {result.cam_slope:.2f}"
    )
    axes[0].legend(fontsize=8)
    axes[1].loglog(pixels, [max(r.ra_seconds, 1e-6) for r in result.rows], "o-", label="region attention")
    axes[1].loglog(pixels, [max(r.cam_seconds, 1e-6) for r in result.rows], "s-", label="patch attention")
    axes[1].set_xlabel("pixels")
    axes[1].set_ylabel("seconds")
    axes[1].set_title("wall clock")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)


def render_eval_summary(summary, out_png):
    """Grouped per-bin bars for the three metrics."""
    bins = [row["bin"] for row in summary]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    for ax, key, label in zip(axes, ("l1_pct", "psnr", "ssim"), ("L1 (%)", "PSNR (dB)", "SSIM")):
        values = [row[key] if row[key] != "NA" else np.nan for row in summary]
        finite = [0.0 if not np.isfinite(v) else v for v in values]
        ax.bar(range(len(bins)), finite, color="#4878a8")
        for i, v in enumerate(values):
            if isinstance(v, float) and np.isinf(v):
                ax.text(i, 0, "inf", ha="center", va="bottom", fontsize=8)
            elif not np.isfinite(v):
                ax.text(i, 0, "NA", ha="center", va="bottom", fontsize=8)
        ax.set_xticks(range(len(bins)))
        ax.set_xticklabels(bins, rotation=30, fontsize=7)
        ax.set_title(label, fontsize=9)
    fig.suptitle("per-bin evaluation summary", fontsize=10)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)


def render_region_overlay(image, region_mask, out_png):
    """Side-by-side input image and argmax region map (report figure)."""
    from .viz import region_palette

    values = region_mask.values.data[0]
    n = values.shape[0]
    argmax = values.argmax(axis=0)
    palette = region_palette(n)
    img01 = np.clip((image.data.transpose(1, 2, 0) + 1) / 2, 0, 1)
    fig, axes = plt.subplots(1, 2, figsize=(7, 3.5))
    axes[0].imshow(img01)
    axes[0].set_title("input")
    axes[1].imshow(palette[argmax])
    axes[1].set_title(f"argmax of {n} region maps")
    for ax in axes:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)
