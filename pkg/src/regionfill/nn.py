"""Parameter containers and the standard layers built from the primitives."""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Tensor, add, div, mul, power, reshape, sub


class Parameter(Tensor):
    """A tensor registered as trainable state of a Module.

    ``version`` is bumped by optimizers on every update so layers with
    derived state (spectral norm) know when to refresh.
    """

    def __init__(self, data, dtype=np.float32):
        super().__init__(np.asarray(data, dtype=dtype), requires_grad=True)
        self.version = 0


class Module:
    """Tracks parameters, buffers and submodules by attribute assignment."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = np.asarray(array)
        object.__setattr__(self, name, self._buffers[name])

    def set_buffer(self, name, array):
        arr = np.asarray(array, dtype=self._buffers[name].dtype)
        self._buffers[name] = arr
        object.__setattr__(self, name, arr)

    # ------------------------------------------------------------------
    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, mod in self._modules.items():
            yield from mod.named_parameters(prefix + name + ".")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, mod in self._modules.items():
            yield from mod.named_buffers(prefix + name + ".")

    def modules(self):
        yield self
        for mod in self._modules.values():
            yield from mod.modules()

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode=True):
        for mod in self.modules():
            object.__setattr__(mod, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def to_dtype(self, dtype):
        """Cast parameters and float buffers in place (e.g. for grad checks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        for mod in self.modules():
            for name, buf in list(mod._buffers.items()):
                if buf.dtype.kind == "f":
                    mod._buffers[name] = buf.astype(dtype)
                    object.__setattr__(mod, name, mod._buffers[name])
        return self

    # ------------------------------------------------------------------
    def state_dict(self):
        state = {name: p.data for name, p in self.named_parameters()}
        for name, b in self.named_buffers():
            state[name] = b
        return state

    def load_state_dict(self, state):
        own_params = dict(self.named_parameters())
        own_buffers = {name: mod for name, mod in self._walk_buffers()}
        missing = set(own_params) | set(own_buffers)
        for name, arr in state.items():
            if name in own_params:
                p = own_params[name]
                if tuple(arr.shape) != p.shape:
                    raise ValueError(
                        f"checkpoint entry {name!r} has shape {tuple(arr.shape)}, "
                        f"model expects {p.shape}"
                    )
                p.data = np.asarray(arr, dtype=p.data.dtype)
                p.grad = None
                missing.discard(name)
            elif name in own_buffers:
                mod, local = own_buffers[name]
                mod.set_buffer(local, arr)
                missing.discard(name)
            else:
                raise ValueError(f"checkpoint entry {name!r} not present in model")
        if missing:
            raise ValueError(f"checkpoint is missing entries: {sorted(missing)}")

    def _walk_buffers(self, prefix=""):
        for name in self._buffers:
            yield prefix + name, (self, name)
        for name, mod in self._modules.items():
            yield from mod._walk_buffers(prefix + name + ".")

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        self._items = []
        for m in mods:
            self.append(m)

    def append(self, mod):
        self._modules[str(len(self._items))] = mod
        self._items.append(mod)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


# ----------------------------------------------------------------------
# initializers


def kaiming_normal(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def orthogonalish(rng, rows, cols):
    """A (rows, cols) matrix with orthonormal rows or columns; deterministic per rng."""
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
    return q if rows >= cols else q.T


# ----------------------------------------------------------------------
# layers


class Linear(Module):
    def __init__(self, in_features, out_features, rng, bias=True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        scale = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(rng.uniform(-scale, scale, size=(out_features, in_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(
        self,
        in_channels,
        out_channels,
        kernel,
        rng,
        stride=1,
        padding=0,
        dilation=1,
        bias=True,
    ):
        super().__init__()
        kh, kw = ops._pair(kernel)
        self.spec = ops.ConvSpec(
            in_channels,
            out_channels,
            (kh, kw),
            ops._pair(stride),
            ops._pair(padding),
            ops._pair(dilation),
        )
        fan_in = in_channels * kh * kw
        self.weight = Parameter(kaiming_normal(rng, (out_channels, in_channels, kh, kw), fan_in))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None

    def forward(self, x):
        s = self.spec
        return ops.conv2d(x, self.weight, self.bias, s.stride, s.padding, s.dilation)


class SpectralConv2d(Conv2d):
    """Conv2d whose weight is divided by its estimated top singular value.

    The persistent vector blocks are re-seeded exactly (small-side Gram
    eigendecomposition) the first training forward after each optimizer
    update; plain warm-started power iteration cannot hold the singular
    value within 1% under Adam updates on the wide conv layers. Eval
    mode reuses the stored vectors unchanged.
    """

    def __init__(self, in_channels, out_channels, kernel, rng, stride=1, padding=0, bias=True):
        super().__init__(in_channels, out_channels, kernel, rng, stride, padding, bias=bias)
        left, right = ops.exact_spectral_state(self._weight_2d())
        self.register_buffer("sn_left", left)
        self.register_buffer("sn_right", right)
        self.power_iters = 1
        self._seen_version = self.weight.version

    def _weight_2d(self):
        return self.weight.data.reshape(self.weight.shape[0], -1)

    def normalized_weight(self):
        w2 = reshape(self.weight, (self.weight.shape[0], -1))
        if self.training and self.weight.version != self._seen_version:
            left, right = ops.exact_spectral_state(self._weight_2d())
            self.sn_left[:] = left
            self.sn_right[:] = right
            self._seen_version = self.weight.version
        wn, _sigma = ops.spectral_normalize(w2, self.sn_left, self.sn_right, iters=0)
        return reshape(wn, self.weight.shape)

    def forward(self, x):
        s = self.spec
        return ops.conv2d(x, self.normalized_weight(), self.bias, s.stride, s.padding, s.dilation)


def _channel_stats_norm(x, mean_axes, eps):
    mu = x.mean(axis=mean_axes, keepdims=True)
    centered = sub(x, mu)
    var = power(centered, 2.0).mean(axis=mean_axes, keepdims=True)
    return div(centered, power(add(var, eps), 0.5)), var


class BatchNorm2d(Module):
    """Per-channel batch normalization with running statistics.

    Training mode normalizes with batch statistics (and needs at least
    two values per channel); eval mode applies the affine map implied by
    the frozen running statistics.
    """

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.scale = Parameter(np.ones(channels))
        self.shift = Parameter(np.zeros(channels))
        self.register_buffer("running_mean", np.zeros(channels, dtype=np.float32))
        self.register_buffer("running_var", np.ones(channels, dtype=np.float32))

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(
                f"batchnorm expects (b,{self.channels},h,w), got {x.shape}"
            )
        b, c, h, w = x.shape
        gamma = reshape(self.scale, (1, c, 1, 1))
        beta = reshape(self.shift, (1, c, 1, 1))
        if self.training:
            n = b * h * w
            if n < 2:
                raise ValueError(
                    f"batchnorm training mode needs batch*h*w >= 2, got {n}"
                )
            normed, var = _channel_stats_norm(x, (0, 2, 3), self.eps)
            m = self.momentum
            batch_mean = x.data.mean(axis=(0, 2, 3))
            unbiased = var.data.reshape(c) * n / (n - 1)
            self.set_buffer(
                "running_mean", (1 - m) * self.running_mean + m * batch_mean
            )
            self.set_buffer("running_var", (1 - m) * self.running_var + m * unbiased)
            return add(mul(normed, gamma), beta)
        rm = Tensor(self.running_mean.reshape(1, c, 1, 1).astype(x.dtype))
        rstd = Tensor(
            (1.0 / np.sqrt(self.running_var + self.eps)).reshape(1, c, 1, 1).astype(x.dtype)
        )
        return add(mul(mul(sub(x, rm), rstd), gamma), beta)


class InstanceNorm2d(Module):
    """Per-sample, per-channel normalization over the spatial axes."""

    def __init__(self, channels, eps=1e-5):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.scale = Parameter(np.ones(channels))
        self.shift = Parameter(np.zeros(channels))

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(
                f"instancenorm expects (b,{self.channels},h,w), got {x.shape}"
            )
        _, c, h, w = x.shape
        if h * w < 2:
            raise ValueError("instancenorm needs h*w >= 2")
        normed, _ = _channel_stats_norm(x, (2, 3), self.eps)
        gamma = reshape(self.scale, (1, c, 1, 1))
        beta = reshape(self.shift, (1, c, 1, 1))
        return add(mul(normed, gamma), beta)
