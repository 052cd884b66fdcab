"""Complexity model: instrumented counts vs closed forms, scaling laws."""

import numpy as np

from regionfill.bench import BenchResult, cam_flops, ra_flops, run_benchmark
from regionfill.region import RaConfig, RegionAttention
from regionfill.tensor import Tensor, flop_count, no_grad, reset_flops


def test_instrumented_counts_match_models_exactly():
    result = run_benchmark([16, 32], n=8, channels=16)
    for row in result.rows:
        assert row.ra_flops_measured == row.ra_flops_analytic
        assert row.cam_flops_measured == row.cam_flops_analytic


def test_ra_flops_model_standalone():
    rng = np.random.default_rng(0)
    attention = RegionAttention(8, 16, RaConfig(n=4, r=4), rng)
    attention.eval()
    x = Tensor(rng.normal(size=(2, 8, 16, 16)).astype(np.float32))
    reset_flops()
    with no_grad():
        attention(x)
    assert flop_count() == ra_flops(2, 8, 16, 16, 4)
    reset_flops()


def test_ra_scaling_in_n_accounted_exactly():
    # doubling the region count doubles every n-linear stage; the n-to-n
    # refinement conv contributes an extra quadratic term, so the total
    # sits between 2x and 4x and the model tracks it exactly
    base = ra_flops(1, 32, 64, 64, 16)
    doubled = ra_flops(1, 32, 64, 64, 32)
    assert 2.0 <= doubled / base <= 4.0
    rng = np.random.default_rng(1)
    attention = RegionAttention(32, 64, RaConfig(n=32, r=4), rng)
    attention.eval()
    x = Tensor(rng.normal(size=(1, 32, 64, 64)).astype(np.float32))
    reset_flops()
    with no_grad():
        attention(x)
    assert flop_count() == doubled
    reset_flops()


def test_linear_vs_quadratic_growth():
    sizes = [16, 32, 64]
    ra = [ra_flops(1, 32, s, s, 16) for s in sizes]
    cam = [cam_flops(1, 32, s, s) for s in sizes]
    # quadrupling pixels: region attention ~4x, patch attention ~16x
    assert 3.5 <= ra[1] / ra[0] <= 4.6
    assert 14.0 <= cam[1] / cam[0] <= 17.0
    assert 3.5 <= ra[2] / ra[1] <= 4.6
    assert 14.0 <= cam[2] / cam[1] <= 17.0


def test_slope_fit():
    rows = run_benchmark([16, 32, 64], n=8, channels=16)
    assert 0.9 <= rows.ra_slope <= 1.1
    assert 1.9 <= rows.cam_slope <= 2.1


def test_wall_clock_recorded():
    result = run_benchmark([16], n=4, channels=8)
    row = result.rows[0]
    assert row.ra_seconds > 0 and row.cam_seconds > 0
