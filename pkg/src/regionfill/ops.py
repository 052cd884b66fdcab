"""Differentiable layer primitives on top of the tensor engine.

Shapes follow the (batch, channels, height, width) convention throughout.
Flop cost models per op are noted inline; they count idealized forward
arithmetic so instrumented totals match closed-form complexity models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import (
    COUNTER,
    Tensor,
    _accumulate,
    _make,
    add,
    div,
    matmul,
    mul,
    reshape,
    transpose,
)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D cross-correlation."""

    in_channels: int
    out_channels: int
    kernel: tuple
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    dilation: tuple = (1, 1)

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")

    def out_size(self, h, w):
        (kh, kw), (sh, sw) = self.kernel, self.stride
        (ph, pw), (dh, dw) = self.padding, self.dilation
        oh = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
        ow = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
        if oh < 1 or ow < 1:
            raise ValueError(
                f"conv output would be {oh}x{ow} for input {h}x{w} with {self}"
            )
        return oh, ow


def _pair(v):
    return tuple(v) if isinstance(v, (tuple, list)) else (v, v)


# ----------------------------------------------------------------------
# convolution — cost model: 2·b·c_out·h'·w'·c_in·kh·kw (+ b·c_out·h'·w' bias)


def conv2d(x, weight, bias=None, stride=1, padding=0, dilation=1):
    """Cross-correlate ``x`` (b,c_in,h,w) with ``weight`` (c_out,c_in,kh,kw)."""
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be 4-D (b,c,h,w), got {x.shape}")
    if weight.ndim != 4:
        raise ValueError(f"conv2d weight must be 4-D, got {weight.shape}")
    b, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ValueError(
            f"conv2d channel mismatch: input has {cin} channels, weight expects {cin_w}"
        )
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    dh, dw = _pair(dilation)
    oh = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    ow = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    if oh < 1 or ow < 1:
        raise ValueError(
            f"conv2d output {oh}x{ow} is empty for input {h}x{w}, "
            f"kernel {kh}x{kw}, stride {sh}x{sw}, pad {ph}x{pw}, dilation {dh}x{dw}"
        )

    xp = x.data
    if ph or pw:
        xp = np.pad(xp, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    s0, s1, s2, s3 = xp.strides
    windows = as_strided(
        xp,
        shape=(b, cin, kh, kw, oh, ow),
        strides=(s0, s1, s2 * dh, s3 * dw, s2 * sh, s3 * sw),
    )
    cols = windows.reshape(b, cin * kh * kw, oh * ow)
    w2 = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(w2, cols).reshape(b, cout, oh, ow)
    COUNTER.add(2 * b * cout * oh * ow * cin * kh * kw)
    if bias is not None:
        if bias.shape != (cout,):
            raise ValueError(f"conv2d bias must have shape ({cout},), got {bias.shape}")
        out = out + bias.data[None, :, None, None]
        COUNTER.add(b * cout * oh * ow)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = g.reshape(b, cout, oh * ow)
        if weight.requires_grad:
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            _accumulate(weight, gw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2)
            gwin = gcols.reshape(b, cin, kh, kw, oh, ow)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                hi = i * dh
                for j in range(kw):
                    wj = j * dw
                    gxp[:, :, hi : hi + sh * oh : sh, wj : wj + sw * ow : sw] += gwin[
                        :, :, i, j
                    ]
            if ph or pw:
                gxp = gxp[:, :, ph : ph + h, pw : pw + w]
            _accumulate(x, gxp)

    return _make(out, parents, backward, "conv2d")


# ----------------------------------------------------------------------
# linear — composed from matmul + add, so costs come from those ops


def linear(x, weight, bias=None):
    """Affine map on the trailing axis: (..., d_in) -> (..., d_out).

    Leading axes are batched, which is exactly the weight sharing used
    when one matrix is applied to every channel independently.
    """
    if weight.ndim != 2:
        raise ValueError(f"linear weight must be 2-D (d_out,d_in), got {weight.shape}")
    d_out, d_in = weight.shape
    if x.shape[-1] != d_in:
        raise ValueError(
            f"linear input trailing dim {x.shape[-1]} does not match weight d_in {d_in}"
        )
    lead = x.shape[:-1]
    flat = reshape(x, (-1, d_in))
    out = matmul(flat, transpose(weight, (1, 0)))
    if bias is not None:
        if bias.shape != (d_out,):
            raise ValueError(f"linear bias must have shape ({d_out},), got {bias.shape}")
        out = add(out, bias)
    return reshape(out, lead + (d_out,))


# ----------------------------------------------------------------------
# activations — cost model: one flop per element


def relu(x):
    data = np.maximum(x.data, 0.0)
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(x, g * (x.data > 0))

    return _make(data, (x,), backward, "relu")


def leaky_relu(x, slope=0.2):
    data = np.where(x.data > 0, x.data, slope * x.data)
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(x, g * np.where(x.data > 0, 1.0, slope))

    return _make(data, (x,), backward, "leaky_relu")


def sigmoid(x):
    data = 1.0 / (1.0 + np.exp(-np.abs(x.data)))
    data = np.where(x.data >= 0, data, 1.0 - data)
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(x, g * data * (1.0 - data))

    return _make(data, (x,), backward, "sigmoid")


def tanh(x):
    data = np.tanh(x.data)
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(x, g * (1.0 - data * data))

    return _make(data, (x,), backward, "tanh")


# ----------------------------------------------------------------------
# softmax — cost model: five passes over the input (max, shift, exp, sum, div)


def softmax(x, axis):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)
    COUNTER.add(5 * x.size)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(x, data * (g - dot))

    return _make(data, (x,), backward, "softmax")


def softmax_over_channels(x):
    """Channel softmax for (b,n,h,w) maps; each pixel's channels sum to 1."""
    if x.ndim != 4:
        raise ValueError(f"softmax_over_channels expects (b,n,h,w), got {x.shape}")
    return softmax(x, axis=1)


# ----------------------------------------------------------------------
# resampling


def avg_down(x, factor):
    """Average-pool by an integer factor. Cost model: in.size + out.size."""
    if x.ndim != 4:
        raise ValueError(f"avg_down expects (b,c,h,w), got {x.shape}")
    f = int(factor)
    if f < 1:
        raise ValueError("factor must be a positive int")
    b, c, h, w = x.shape
    if h % f != 0:
        raise ValueError(f"height {h} not divisible by downsample factor {f}")
    if w % f != 0:
        raise ValueError(f"width {w} not divisible by downsample factor {f}")
    data = x.data.reshape(b, c, h // f, f, w // f, f).mean(axis=(3, 5))
    COUNTER.add(x.size + data.size)

    def backward(g):
        grad = np.broadcast_to(
            g[:, :, :, None, :, None] / (f * f), (b, c, h // f, f, w // f, f)
        ).reshape(b, c, h, w)
        _accumulate(x, np.ascontiguousarray(grad))

    return _make(data, (x,), backward, "avg_down")


def _bilinear_matrix(n_in, factor, dtype):
    """Dense 1-D interpolation matrix (align_corners=False, edges clamped)."""
    n_out = n_in * factor
    src = (np.arange(n_out, dtype=np.float64) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = src - i0
    mat = np.zeros((n_out, n_in), dtype=dtype)
    mat[np.arange(n_out), i0] += 1.0 - t
    mat[np.arange(n_out), i1] += t
    return mat


def bilinear_up(x, factor):
    """Bilinear upsample by an integer factor (align_corners=False).

    Cost model: 4 flops per element of each separable stage,
    i.e. 4·b·c·(f·h)·w + 4·b·c·(f·h)·(f·w).
    """
    if x.ndim != 4:
        raise ValueError(f"bilinear_up expects (b,c,h,w), got {x.shape}")
    f = int(factor)
    if f < 1:
        raise ValueError("factor must be a positive int")
    b, c, h, w = x.shape
    uh = _bilinear_matrix(h, f, x.data.dtype)
    uw = _bilinear_matrix(w, f, x.data.dtype)
    mid = np.matmul(uh, x.data)  # (b,c,f·h,w)
    data = np.matmul(mid, uw.T)  # (b,c,f·h,f·w)
    COUNTER.add(4 * mid.size + 4 * data.size)

    def backward(g):
        _accumulate(x, np.matmul(uh.T, np.matmul(g, uw)))

    return _make(data, (x,), backward, "bilinear_up")


def global_avg_pool(x):
    """Spatial mean of a (b,c,h,w) map, returned as (b,c). Cost: in.size."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool expects (b,c,h,w), got {x.shape}")
    b, c, h, w = x.shape
    data = x.data.mean(axis=(2, 3))
    COUNTER.add(x.size)

    def backward(g):
        grad = np.broadcast_to(g[:, :, None, None] / (h * w), x.shape)
        _accumulate(x, np.ascontiguousarray(grad))

    return _make(data, (x,), backward, "global_avg_pool")


# ----------------------------------------------------------------------
# Gram matrix — composed of a batched matmul and a constant scale


def gram_matrix(features):
    """Channel co-occurrence matrix F·Fᵀ / (c·h·w) of (b,c,h,w) features."""
    if features.ndim != 4:
        raise ValueError(f"gram_matrix expects (b,c,h,w), got {features.shape}")
    b, c, h, w = features.shape
    flat = reshape(features, (b, c, h * w))
    gram = matmul(flat, transpose(flat, (0, 2, 1)))
    return mul(gram, 1.0 / (c * h * w))


# ----------------------------------------------------------------------
# patch extraction / assembly


def reflect_pad2d(x, pad):
    """Reflect-pad the trailing two axes. Data movement only (0 flops)."""
    if x.ndim < 2:
        raise ValueError(f"reflect_pad2d needs >=2-D input, got {x.shape}")
    p = int(pad)
    if p == 0:
        return x
    h, w = x.shape[-2], x.shape[-1]
    if p >= h or p >= w:
        raise ValueError(f"pad {p} too large for {h}x{w} input")
    width = [(0, 0)] * (x.ndim - 2) + [(p, p), (p, p)]
    data = np.pad(x.data, width, mode="reflect")
    # source index maps for the gradient scatter
    idx_h = np.pad(np.arange(h), (p, p), mode="reflect")
    idx_w = np.pad(np.arange(w), (p, p), mode="reflect")

    def backward(g):
        grad = np.zeros(x.shape, dtype=x.data.dtype)
        flat = g.reshape(-1, h + 2 * p, w + 2 * p)
        gflat = grad.reshape(-1, h, w)
        for view, acc in zip(flat, gflat):
            np.add.at(acc, (idx_h[:, None], idx_w[None, :]), view)
        _accumulate(x, grad)

    return _make(data, (x,), backward, "reflect_pad2d")


def crop2d(x, top, left, height, width):
    """Crop the trailing two axes; gradient zero-pads back. 0 flops."""
    sl = (Ellipsis, slice(top, top + height), slice(left, left + width))
    data = x.data[sl]
    if data.shape[-2] != height or data.shape[-1] != width:
        raise ValueError(
            f"crop ({top},{left})+{height}x{width} exceeds input {x.shape}"
        )

    def backward(g):
        grad = np.zeros(x.shape, dtype=x.data.dtype)
        grad[sl] = g
        _accumulate(x, grad)

    return _make(data, (x,), backward, "crop2d")


def window_count(h, w, patch):
    return (h - patch + 1) * (w - patch + 1)


def unfold_patches(x, patch):
    """All full ``patch``×``patch`` windows of (c,h,w) as rows (K, c·p·p).

    Data movement only; cost model charges nothing.
    """
    if x.ndim != 3:
        raise ValueError(f"unfold_patches expects (c,h,w), got {x.shape}")
    c, h, w = x.shape
    p = int(patch)
    if h < p or w < p:
        raise ValueError(f"input {h}x{w} smaller than patch {p}")
    oh, ow = h - p + 1, w - p + 1
    s0, s1, s2 = x.data.strides
    windows = as_strided(
        x.data, shape=(oh, ow, c, p, p), strides=(s1, s2, s0, s1, s2)
    )
    data = windows.reshape(oh * ow, c * p * p)

    def backward(g):
        gwin = g.reshape(oh, ow, c, p, p)
        grad = np.zeros_like(x.data)
        for i in range(p):
            for j in range(p):
                grad[:, i : i + oh, j : j + ow] += gwin[:, :, :, i, j].transpose(2, 0, 1)
        _accumulate(x, grad)

    return _make(data, (x,), backward, "unfold_patches")


def fold_patches(rows, patch, height, width):
    """Overlap-add rows (K, c·p·p) back onto a (c,h,w) canvas.

    Cost model: one add per row element. Divide by ``fold_counts`` to
    average overlapping contributions.
    """
    p = int(patch)
    oh, ow = height - p + 1, width - p + 1
    k, d = rows.shape
    if k != oh * ow or d % (p * p) != 0:
        raise ValueError(
            f"fold_patches got rows {rows.shape} for canvas {height}x{width}, patch {p}"
        )
    c = d // (p * p)
    rwin = rows.data.reshape(oh, ow, c, p, p)
    data = np.zeros((c, height, width), dtype=rows.data.dtype)
    for i in range(p):
        for j in range(p):
            data[:, i : i + oh, j : j + ow] += rwin[:, :, :, i, j].transpose(2, 0, 1)
    COUNTER.add(rows.size)

    def backward(g):
        s0, s1, s2 = g.strides
        gwin = as_strided(g, shape=(oh, ow, c, p, p), strides=(s1, s2, s0, s1, s2))
        _accumulate(rows, gwin.reshape(k, d).copy())

    return _make(data, (rows,), backward, "fold_patches")


def fold_counts(patch, height, width, dtype=np.float64):
    """How many windows cover each pixel when folding stride-1 patches."""
    p = int(patch)
    oh, ow = height - p + 1, width - p + 1
    ones = np.ones((oh * ow, p * p), dtype=dtype)
    rwin = ones.reshape(oh, ow, 1, p, p)
    counts = np.zeros((1, height, width), dtype=dtype)
    for i in range(p):
        for j in range(p):
            counts[:, i : i + oh, j : j + ow] += rwin[:, :, :, i, j].transpose(2, 0, 1)
    return counts


# ----------------------------------------------------------------------
# spectral normalization


def make_spectral_state(rng, rows, cols, block=4):
    """Persistent left/right singular-vector blocks for power iteration."""
    b = max(1, min(block, rows, cols))
    left = rng.normal(size=(rows, b))
    left, _ = np.linalg.qr(left)
    right = np.zeros((cols, b))
    return left.astype(np.float64), right.astype(np.float64)


def exact_spectral_state(weight_2d, block=4):
    """Vector blocks seeded from the exact top singular subspace.

    Uses the eigendecomposition of the small-side Gram matrix, so the
    cost is one GEMM plus a tiny symmetric eigensolve. The GEMM runs in
    the weight dtype; the eigensolve in float64.
    """
    w = np.asarray(weight_2d)
    rows, cols = w.shape
    b = max(1, min(block, rows, cols))
    if rows <= cols:
        _, vecs = np.linalg.eigh((w @ w.T).astype(np.float64))
        left = vecs[:, ::-1][:, :b].copy()
        right, _ = np.linalg.qr((w.T @ left.astype(w.dtype)).astype(np.float64))
    else:
        _, vecs = np.linalg.eigh((w.T @ w).astype(np.float64))
        right = vecs[:, ::-1][:, :b].copy()
        left, _ = np.linalg.qr((w @ right.astype(w.dtype)).astype(np.float64))
    return left, right


def power_iteration(weight_2d, left, right, iters):
    """Block power iteration on the singular subspaces, updated in place.

    A block of vectors with QR re-orthogonalization converges on the
    top singular pair far faster than a single vector when the leading
    singular values are close together. Iterates in the weight dtype.
    """
    w = weight_2d
    lw = left.astype(w.dtype, copy=False)
    for _ in range(int(iters)):
        q, _ = np.linalg.qr(w.T @ lw)
        right[:] = q
        q, _ = np.linalg.qr(w @ right.astype(w.dtype, copy=False))
        lw = q
        left[:] = q
    return left, right


def _rayleigh_top_pair(weight_2d, left, right):
    """Collapse the blocks to the best current top singular pair."""
    w = weight_2d
    lw = left.astype(w.dtype, copy=False)
    rw = right.astype(w.dtype, copy=False)
    b = (lw.T @ (w @ rw)).astype(np.float64)
    pu, _s, qvt = np.linalg.svd(b)
    u = left @ pu[:, 0]
    v = right @ qvt[0, :]
    return u, v


def spectral_normalize(weight, left, right, iters=1, eps=1e-12):
    """Divide ``weight`` (2-D) by its estimated top singular value.

    ``left``/``right`` are the persistent vector blocks updated in
    place; the returned tensor is differentiable w.r.t. ``weight`` with
    the vectors held constant, matching standard spectral-norm training.
    Returns (normalized weight, sigma estimate). A zero matrix gets
    sigma floored at ``eps`` instead of dividing by zero.
    """
    if weight.ndim != 2:
        raise ValueError(f"spectral_normalize expects a 2-D weight, got {weight.shape}")
    if iters > 0:
        power_iteration(weight.data, left, right, iters)
    if not np.any(np.abs(weight.data) > eps):
        return mul(weight, 1.0 / eps), eps
    u, v = _rayleigh_top_pair(weight.data, left, right)
    ut = Tensor(u.reshape(1, -1).astype(weight.data.dtype))
    vt = Tensor(v.reshape(-1, 1).astype(weight.data.dtype))
    sigma = matmul(ut, matmul(weight, vt))  # (1,1)
    if abs(float(sigma.data[0, 0])) < eps:
        return mul(weight, 1.0 / eps), eps
    return div(weight, sigma), abs(float(sigma.data[0, 0]))
