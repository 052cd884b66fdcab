"""Single-stage inpainting generator and the spectrally-normalized patch
discriminator driving the adversarial loss."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import ops
from .lga import LgaConfig, LocalGlobalAttention
from .nn import Conv2d, InstanceNorm2d, Module, ModuleList, SpectralConv2d
from .region import RaConfig
from .tensor import Tensor, add, concat, mul, sub

MASK_KNOWN = 1.0  # mask convention everywhere: 1 = known pixel, 0 = hole


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator shape and attention placement.

    ``lga_placement`` is "encoder" (after the first two encoder layers),
    "decoder" (at the inputs of the last two decoder layers) or "none".
    ``attention`` switches the global branch between "ra" and the "cam"
    baseline for ablations.
    """

    base_channels: int = 32
    image_size: int = 64
    lga_placement: str = "encoder"
    attention: str = "ra"
    n_regions: int = 16
    r: int = 4
    dilated_blocks: int = 4
    se_reduction: int = 4
    sk_reduction: int = 4

    def __post_init__(self):
        if self.lga_placement not in ("encoder", "decoder", "none"):
            raise ValueError(f"unknown lga_placement {self.lga_placement!r}")
        if self.attention not in ("ra", "cam"):
            raise ValueError(f"unknown attention {self.attention!r}")
        if self.image_size % (4 * self.r):
            raise ValueError(
                f"image_size {self.image_size} must be divisible by 4*r = {4 * self.r} "
                f"so every attention placement sees maps divisible by r={self.r}"
            )
        if self.lga_placement != "none":
            for red in (self.se_reduction, self.sk_reduction):
                if self.base_channels % red:
                    raise ValueError(
                        f"base_channels {self.base_channels} must be divisible by the "
                        f"se/sk reductions ({self.se_reduction}/{self.sk_reduction})"
                    )

    def lga_config(self):
        return LgaConfig(
            ra=RaConfig(n=self.n_regions, r=self.r),
            se_reduction=self.se_reduction,
            sk_reduction=self.sk_reduction,
        )


class ConvNormRelu(Module):
    def __init__(self, cin, cout, kernel, rng, stride=1, padding=0):
        super().__init__()
        self.conv = Conv2d(cin, cout, kernel, rng, stride=stride, padding=padding)
        self.norm = InstanceNorm2d(cout)

    def forward(self, x):
        return ops.relu(self.norm(self.conv(x)))


class ResidualDilatedBlock(Module):
    """3x3 dilation-2 conv with norm/relu and a residual add."""

    def __init__(self, channels, rng):
        super().__init__()
        self.conv = Conv2d(channels, channels, 3, rng, padding=2, dilation=2)
        self.norm = InstanceNorm2d(channels)

    def forward(self, x):
        return add(x, ops.relu(self.norm(self.conv(x))))


def _require_binary_mask(mask, image_shape):
    b, _, h, w = image_shape
    if mask.shape != (b, 1, h, w):
        raise ValueError(
            f"mask shape {mask.shape} does not match image {(b, 1, h, w)}"
        )
    m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    if not np.all((m == 0) | (m == 1)):
        raise ValueError("mask must be binary with 1 = known pixel")


def downsample_mask(mask, factor):
    """Binary mask at a coarser resolution; a block is known only if all
    its pixels are known (conservative min-pool)."""
    m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    b, c, h, w = m.shape
    f = int(factor)
    if f == 1:
        return m
    return m.reshape(b, c, h // f, f, w // f, f).min(axis=(3, 5))


class Generator(Module):
    """Encoder, four dilated residual blocks, decoder; attention layers per
    the configured placement. Input is the hole-zeroed image concatenated
    with the mask; output is a tanh image of the same size."""

    def __init__(self, config, rng):
        super().__init__()
        self.config = config
        c0 = config.base_channels
        c1, c2 = 2 * c0, 4 * c0
        s = config.image_size
        self.enc1 = ConvNormRelu(4, c0, 7, rng, stride=1, padding=3)
        self.enc2 = ConvNormRelu(c0, c1, 4, rng, stride=2, padding=1)
        self.enc3 = ConvNormRelu(c1, c2, 4, rng, stride=2, padding=1)
        self.blocks = ModuleList(
            [ResidualDilatedBlock(c2, rng) for _ in range(config.dilated_blocks)]
        )
        self.dec1 = ConvNormRelu(c2, c1, 3, rng, stride=1, padding=1)
        self.dec2 = ConvNormRelu(c1, c0, 3, rng, stride=1, padding=1)
        self.out_conv = Conv2d(c0, 3, 3, rng, padding=1)
        # near-zero output init: training starts from a neutral prediction
        self.out_conv.weight.data *= 0.05

        lcfg = config.lga_config()
        if config.lga_placement == "encoder":
            placements = [(c0, s), (c1, s // 2)]
        elif config.lga_placement == "decoder":
            placements = [(c1, s // 2), (c0, s)]
        else:
            placements = []
        self.lga = ModuleList(
            [
                LocalGlobalAttention(ch, res, lcfg, rng, attention=config.attention)
                for ch, res in placements
            ]
        )
        self._lga_factors = [s // res for _, res in placements]

    def forward(self, image, mask):
        """(b,3,H,W) hole-zeroed image + (b,1,H,W) binary mask ->
        ((b,3,H,W) prediction in [-1,1], list of collected region masks)."""
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"expected (b,3,H,W) image, got {image.shape}")
        s = self.config.image_size
        if image.shape[2] != s or image.shape[3] != s:
            raise ValueError(
                f"this generator is built for {s}x{s} images, got "
                f"{image.shape[2]}x{image.shape[3]}"
            )
        _require_binary_mask(mask, image.shape)
        need_masks = self.config.attention == "cam" and len(self.lga) > 0
        lga_masks = (
            [Tensor(downsample_mask(mask, f)) for f in self._lga_factors]
            if need_masks
            else [None] * len(self.lga)
        )

        collected = []

        def attend(i, x):
            y, rm = self.lga[i](x, valid_mask=lga_masks[i])
            if rm is not None:
                collected.append(rm)
            return y

        x = concat([image, mask], axis=1)
        x = self.enc1(x)
        if self.config.lga_placement == "encoder":
            x = attend(0, x)
        x = self.enc2(x)
        if self.config.lga_placement == "encoder":
            x = attend(1, x)
        x = self.enc3(x)
        for block in self.blocks:
            x = block(x)
        x = self.dec1(ops.bilinear_up(x, 2))
        if self.config.lga_placement == "decoder":
            x = attend(0, x)
        x = self.dec2(ops.bilinear_up(x, 2))
        if self.config.lga_placement == "decoder":
            x = attend(1, x)
        pred = ops.tanh(self.out_conv(x))
        return pred, collected


def composite(image_in, prediction, mask):
    """Known pixels from the input, hole pixels from the prediction."""
    if image_in.shape != prediction.shape:
        raise ValueError(
            f"composite shapes differ: {image_in.shape} vs {prediction.shape}"
        )
    _require_binary_mask(mask, image_in.shape)
    return add(mul(image_in, mask), mul(prediction, sub(1.0, mask)))


@dataclass(frozen=True)
class DiscriminatorSpec:
    """Patch discriminator: six stride-2 convs, all spectrally normalized,
    then a 1x1 projection to a single-channel patch-score map."""

    channels: tuple = (64, 128, 256, 256, 256, 256)
    kernel: int = 5
    stride: int = 2
    padding: int = 2
    leaky_slope: float = 0.2
    min_size: int = 64


class PatchDiscriminator(Module):
    def __init__(self, rng, spec=DiscriminatorSpec()):
        super().__init__()
        self.spec = spec
        layers = []
        cin = 3
        for cout in spec.channels:
            layers.append(
                SpectralConv2d(
                    cin, cout, spec.kernel, rng, stride=spec.stride, padding=spec.padding
                )
            )
            cin = cout
        self.convs = ModuleList(layers)
        self.head = SpectralConv2d(cin, 1, 1, rng)

    def forward(self, image):
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"expected (b,3,H,W) image, got {image.shape}")
        h, w = image.shape[2], image.shape[3]
        if h < self.spec.min_size or w < self.spec.min_size:
            raise ValueError(
                f"discriminator needs at least {self.spec.min_size}px inputs, got {h}x{w}"
            )
        x = image
        for conv in self.convs:
            x = ops.leaky_relu(conv(x), self.spec.leaky_slope)
        return self.head(x)

    def normalized_singular_values(self):
        """Top singular value of each normalized conv weight (for checks)."""
        out = {}
        for name, mod in [(f"convs.{i}", c) for i, c in enumerate(self.convs)] + [
            ("head", self.head)
        ]:
            was_training = mod.training
            mod.eval()
            wn = mod.normalized_weight().data.reshape(mod.weight.shape[0], -1)
            mod.train(was_training)
            out[name] = float(np.linalg.svd(wn.astype(np.float64), compute_uv=False)[0])
        return out


def build_ablation_config(experiment, **overrides):
    """Configs for the attention-placement ablations.

    1: no attention layers; 2: cam in the encoder; 3: cam in the decoder;
    4: region attention in the encoder (the shipped model); 5: region
    attention in the decoder.
    """
    table = {
        1: dict(lga_placement="none"),
        2: dict(lga_placement="encoder", attention="cam"),
        3: dict(lga_placement="decoder", attention="cam"),
        4: dict(lga_placement="encoder", attention="ra"),
        5: dict(lga_placement="decoder", attention="ra"),
    }
    if experiment not in table:
        raise ValueError(f"unknown ablation experiment {experiment}; pick 1-5")
    base = GeneratorConfig(**overrides)
    return replace(base, **table[experiment])
