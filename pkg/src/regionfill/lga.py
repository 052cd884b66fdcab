"""Local-global attention: a region-attention branch for global structure
fused with a squeeze-excitation branch for local channel relevance via a
two-way selective-kernel gate."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ops
from .nn import Linear, Module
from .region import CamAttention, RaConfig, RegionAttention
from .tensor import add, mul, reshape, sub


@dataclass(frozen=True)
class LgaConfig:
    ra: RaConfig = field(default_factory=RaConfig)
    se_reduction: int = 4
    sk_reduction: int = 4

    def validate_channels(self, channels):
        if channels % self.se_reduction:
            raise ValueError(
                f"channels {channels} not divisible by se_reduction {self.se_reduction}"
            )
        if channels % self.sk_reduction:
            raise ValueError(
                f"channels {channels} not divisible by sk_reduction {self.sk_reduction}"
            )


class SqueezeExcite(Module):
    """Channel gate: pool -> bottleneck MLP -> sigmoid -> rescale."""

    def __init__(self, channels, reduction, rng):
        super().__init__()
        if channels % reduction:
            raise ValueError(f"channels {channels} not divisible by reduction {reduction}")
        self.fc1 = Linear(channels, channels // reduction, rng)
        self.fc2 = Linear(channels // reduction, channels, rng)
        # slightly positive bias keeps the narrow relu bottleneck alive at init
        self.fc1.bias.data[:] = 0.1

    def forward(self, x):
        b, c = x.shape[0], x.shape[1]
        squeezed = ops.global_avg_pool(x)
        gate = ops.sigmoid(self.fc2(ops.relu(self.fc1(squeezed))))
        return mul(x, reshape(gate, (b, c, 1, 1)))


class SelectiveFusion(Module):
    """Two-branch selective-kernel gate.

    The summed branches are squeezed to a bottleneck; two linear heads
    produce per-channel logits and a softmax across the two branches
    yields mixing weights a + b = 1. The pairwise softmax is computed as
    a sigmoid of the logit difference.
    """

    def __init__(self, channels, reduction, rng):
        super().__init__()
        if channels % reduction:
            raise ValueError(f"channels {channels} not divisible by reduction {reduction}")
        self.squeeze = Linear(channels, channels // reduction, rng)
        self.head_global = Linear(channels // reduction, channels, rng)
        self.head_local = Linear(channels // reduction, channels, rng)
        # slightly positive bias keeps the narrow relu bottleneck alive at init
        self.squeeze.bias.data[:] = 0.1

    def branch_weights(self, y_global, y_local):
        fused = add(y_global, y_local)
        z = ops.relu(self.squeeze(ops.global_avg_pool(fused)))
        logit_g = self.head_global(z)
        logit_l = self.head_local(z)
        a = ops.sigmoid(sub(logit_g, logit_l))
        return a, sub(1.0, a)

    def forward(self, y_global, y_local):
        if y_global.shape != y_local.shape:
            raise ValueError(
                f"branch shapes differ: {y_global.shape} vs {y_local.shape}"
            )
        b, c = y_global.shape[0], y_global.shape[1]
        a, bw = self.branch_weights(y_global, y_local)
        a4 = reshape(a, (b, c, 1, 1))
        b4 = reshape(bw, (b, c, 1, 1))
        return add(mul(y_global, a4), mul(y_local, b4))


class LocalGlobalAttention(Module):
    """Fuses a global attention branch with a squeeze-excitation branch.

    ``attention`` picks the global branch: "ra" (default) or "cam" (the
    patch-matching baseline, which additionally needs a validity mask at
    forward time). Returns the fused map plus the region mask when the
    global branch produces one.
    """

    def __init__(self, channels, resolution, config, rng, attention="ra", cam_patch=3):
        super().__init__()
        config.validate_channels(channels)
        self.kind = attention
        if attention == "ra":
            self.attend = RegionAttention(channels, resolution, config.ra, rng)
        elif attention == "cam":
            self.attend = CamAttention(patch=cam_patch)
        else:
            raise ValueError(f"unknown attention kind {attention!r}")
        self.se = SqueezeExcite(channels, config.se_reduction, rng)
        self.sk = SelectiveFusion(channels, config.sk_reduction, rng)

    def forward(self, x, valid_mask=None):
        if self.kind == "ra":
            y_global, region_mask = self.attend(x)
        else:
            if valid_mask is None:
                raise ValueError("cam attention needs a valid_mask at forward time")
            y_global = self.attend(x, valid_mask)
            region_mask = None
        y_local = self.se(x)
        return self.sk(y_global, y_local), region_mask
