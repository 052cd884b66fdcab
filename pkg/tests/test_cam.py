"""Patch-attention baseline: oracle equality, dominance, cost counting."""

import numpy as np
import pytest

from regionfill.bench import cam_flops
from regionfill.gradcheck import grad_check
from regionfill.region import cam_forward
from regionfill.tensor import Tensor, flop_count, no_grad, reset_flops


def oracle_cam(x, mask, patch=3, scale=10.0):
    """Independent loop implementation; also returns the attention rows."""
    b, c, h, w = x.shape
    pad = patch // 2
    outs = np.zeros_like(x)
    atts = []
    for bi in range(b):
        xp = np.pad(x[bi], ((0, 0), (pad, pad), (pad, pad)), mode="reflect")
        mp = np.pad(mask[bi, 0], pad, mode="reflect")
        rows = []
        valid = []
        for i in range(h):
            for j in range(w):
                rows.append(xp[:, i : i + patch, j : j + patch].reshape(-1))
                valid.append(mp[i : i + patch, j : j + patch].min() >= 0.5)
        rows = np.array(rows)
        ctx = np.nonzero(valid)[0]
        norm = np.sqrt((rows**2).sum(axis=1) + 1e-12)
        unit = rows / norm[:, None]
        scores = unit @ unit[ctx].T * scale
        att = np.exp(scores - scores.max(axis=1, keepdims=True))
        att /= att.sum(axis=1, keepdims=True)
        mixed = att @ rows[ctx]
        canvas = np.zeros((c, h + 2 * pad, w + 2 * pad))
        counts = np.zeros((h + 2 * pad, w + 2 * pad))
        for idx, (i, j) in enumerate((i, j) for i in range(h) for j in range(w)):
            canvas[:, i : i + patch, j : j + patch] += mixed[idx].reshape(c, patch, patch)
            counts[i : i + patch, j : j + patch] += 1
        outs[bi] = (canvas / counts)[:, pad : pad + h, pad : pad + w]
        atts.append(att)
    return outs, atts


def test_constant_input_reproduces_exactly():
    x = Tensor(np.full((1, 3, 6, 7), 2.5, dtype=np.float32))
    out = cam_forward(x, Tensor(np.ones((1, 1, 6, 7), dtype=np.float32)))
    np.testing.assert_allclose(out.data, 2.5, atol=1e-6)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 6, 5))
    mask = np.ones((2, 1, 6, 5))
    mask[0, 0, 0:2, 0:2] = 0.0
    out = cam_forward(Tensor(x), Tensor(mask))
    ref, _ = oracle_cam(x, mask)
    np.testing.assert_allclose(out.data, ref, atol=1e-5)


def test_self_match_dominates_with_orthogonal_windows():
    # image columns cycle through one-hot channel vectors, so interior
    # windows are mutually orthogonal patches and each query's best
    # match is itself
    basis = np.eye(3)
    x = np.stack([np.tile(basis[j % 3][:, None], (1, 3)) for j in range(5)], axis=-1)
    x = x[None].astype(np.float64)  # (1, c=3, h=3, w=5)
    mask = np.ones((1, 1, 3, 5))
    out = cam_forward(Tensor(x), Tensor(mask), scale=10.0)
    np.testing.assert_allclose(out.data, x, atol=0.1)
    _, atts = oracle_cam(x, mask)
    att = atts[0]
    center_query = 1 * 5 + 2  # middle pixel
    # the three windows of the center column hold identical patches; all
    # the attention mass should land on them
    matching = [0 * 5 + 2, 1 * 5 + 2, 2 * 5 + 2]
    assert att[center_query, matching].sum() > 0.95


def test_chunking_does_not_change_result():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1, 2, 6, 6))
    mask = np.ones((1, 1, 6, 6))
    a = cam_forward(Tensor(x), Tensor(mask), chunk=5).data
    b = cam_forward(Tensor(x), Tensor(mask), chunk=None).data
    np.testing.assert_allclose(a, b, atol=1e-12)  # GEMM blocking differs by ULPs


def test_gradient():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=(1, 2, 5, 6)), requires_grad=True, dtype=np.float64)
    mask = np.ones((1, 1, 5, 6))
    mask[0, 0, 0, 0] = 0.0
    mult = Tensor(rng.normal(size=(1, 2, 5, 6)))
    report = grad_check(
        lambda t: (cam_forward(t, Tensor(mask)) * mult).sum(), [x], max_entries=24
    )
    assert report.max_rel_err < 1e-4


def test_no_valid_window_error():
    x = Tensor(np.ones((1, 2, 5, 5)))
    with pytest.raises(ValueError, match="no fully-valid"):
        cam_forward(x, Tensor(np.zeros((1, 1, 5, 5))))


def test_mask_validation():
    x = Tensor(np.ones((1, 2, 5, 5)))
    with pytest.raises(ValueError, match="binary"):
        cam_forward(x, Tensor(np.full((1, 1, 5, 5), 0.5)))
    with pytest.raises(ValueError, match="shape"):
        cam_forward(x, Tensor(np.ones((1, 1, 4, 4))))
    with pytest.raises(ValueError, match="odd"):
        cam_forward(x, Tensor(np.ones((1, 1, 5, 5))), patch=4)


def test_flop_count_matches_model():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(2, 4, 8, 8)).astype(np.float32))
    mask = Tensor(np.ones((2, 1, 8, 8), dtype=np.float32))
    reset_flops()
    with no_grad():
        cam_forward(x, mask)
    assert flop_count() == cam_flops(2, 4, 8, 8, patch=3)
    reset_flops()


def test_flop_count_with_holes_uses_context_count():
    rng = np.random.default_rng(4)
    x = Tensor(rng.normal(size=(1, 2, 8, 8)).astype(np.float32))
    mask = np.ones((1, 1, 8, 8), dtype=np.float32)
    mask[0, 0, 0:3, 0:3] = 0.0
    from regionfill.region import _valid_window_rows

    kc = _valid_window_rows(mask[0, 0], 3).size
    reset_flops()
    with no_grad():
        cam_forward(x, Tensor(mask))
    assert flop_count() == cam_flops(1, 2, 8, 8, patch=3, contexts=kc)
    reset_flops()
