"""Region-map export, palettes, figures, and the conv geometry type."""

import numpy as np
from PIL import Image

from regionfill import ops
from regionfill.figures import render_bench_figure, render_eval_summary, render_loss_curves
from regionfill.bench import run_benchmark
from regionfill.region import RaConfig, RegionAttention
from regionfill.tensor import Tensor
from regionfill.viz import export_region_maps, region_palette


def make_region_mask(n=4, size=8):
    rng = np.random.default_rng(0)
    ra = RegionAttention(3, size, RaConfig(n=n, r=4), rng)
    x = Tensor(rng.normal(size=(1, 3, size, size)).astype(np.float32))
    _, rm = ra(x)
    return rm


def test_export_writes_2n_plus_1_files(tmp_path):
    n = 4
    rm = make_region_mask(n)
    paths = export_region_maps(rm, tmp_path, prefix="p")
    assert len(paths) == 2 * n + 1
    for p in paths:
        assert (tmp_path / p).exists() or (tmp_path / p).name  # absolute already
    with Image.open(tmp_path / "p_rm_00.png") as im:
        arr = np.asarray(im)
        assert im.mode == "L" and arr.dtype == np.uint8
    # probability maps scale [0,1] -> [0,255] directly
    expected = np.clip(rm.values.data[0, 0] * 255.0, 0, 255).round().astype(np.uint8)
    np.testing.assert_array_equal(arr, expected)


def test_argmax_map_uses_fixed_palette(tmp_path):
    rm = make_region_mask(3)
    export_region_maps(rm, tmp_path, prefix="q")
    with Image.open(tmp_path / "q_argmax.png") as im:
        arr = np.asarray(im)
    palette = region_palette(3)
    used = {tuple(c) for c in arr.reshape(-1, 3)}
    assert used <= {tuple(c) for c in palette}
    np.testing.assert_array_equal(region_palette(3), region_palette(3))


def test_figures_render_to_files(tmp_path):
    history = [
        {"step": i, "total": 1.0 / (i + 1), "l1": 0.5 / (i + 1), "perceptual": 0.0,
         "style": 0.0, "adversarial": 0.0, "d_loss": 0.0}
        for i in range(5)
    ]
    assert render_loss_curves(history, tmp_path / "loss.png")
    result = run_benchmark([8, 16], n=4, channels=8)
    assert render_bench_figure(result, tmp_path / "bench.png")
    summary = [
        {"bin": "10-20%", "count": 1, "l1_pct": 1.0, "psnr": 30.0, "ssim": 0.9},
        {"bin": "20-30%", "count": 0, "l1_pct": "NA", "psnr": "NA", "ssim": "NA"},
        {"bin": "30-40%", "count": 1, "l1_pct": 2.0, "psnr": float("inf"), "ssim": 0.8},
        {"bin": "40-50%", "count": 0, "l1_pct": "NA", "psnr": "NA", "ssim": "NA"},
        {"bin": "other", "count": 0, "l1_pct": "NA", "psnr": "NA", "ssim": "NA"},
    ]
    assert render_eval_summary(summary, tmp_path / "summary.png")
    for name in ("loss.png", "bench.png", "summary.png"):
        assert (tmp_path / name).stat().st_size > 0


def test_conv_spec_geometry():
    spec = ops.ConvSpec(3, 8, (3, 3), (2, 2), (1, 1), (1, 1))
    assert spec.out_size(8, 8) == (4, 4)
    spec_dil = ops.ConvSpec(3, 8, (3, 3), (1, 1), (2, 2), (2, 2))
    assert spec_dil.out_size(8, 8) == (8, 8)
    import pytest

    with pytest.raises(ValueError, match="conv output"):
        ops.ConvSpec(1, 1, (7, 7)).out_size(3, 3)
    with pytest.raises(ValueError, match="positive"):
        ops.ConvSpec(0, 1, (3, 3))
