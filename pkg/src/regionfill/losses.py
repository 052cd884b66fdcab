"""Training losses: reconstruction, perceptual, style, and the
relativistic-average least-squares adversarial pair, plus the pluggable
feature extractor backing the perceptual/style terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .checkpoint import load_checkpoint
from .nn import Conv2d, Module, ModuleList, orthogonalish
from .tensor import Tensor, absolute, add, mul, sub

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the four generator loss terms. Zero disables a term."""

    l1: float = 1.0
    perceptual: float = 0.1
    style: float = 250.0
    adversarial: float = 0.1

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"loss weight {name} must be finite and >= 0, got {value}")

    def as_dict(self):
        return {
            "l1": self.l1,
            "perceptual": self.perceptual,
            "style": self.style,
            "adversarial": self.adversarial,
        }


class _ConvStage(Module):
    """conv -> relu -> 2x average downsample."""

    def __init__(self, cin, cout, rng):
        super().__init__()
        self.conv = Conv2d(cin, cout, 3, rng, padding=1)

    def forward(self, x):
        return ops.avg_down(ops.relu(self.conv(x)), 2)


class FeatureExtractor(Module):
    """Ordered, named feature stages mapping an image to feature maps.

    Stage i's features are the cumulative output after block i; spatial
    sizes strictly decrease stage over stage. Parameters are frozen:
    loss gradients flow through the features to the image, never into
    the extractor.
    """

    def __init__(self, blocks, names):
        super().__init__()
        if len(blocks) != len(names) or not blocks:
            raise ValueError("need one name per stage and at least one stage")
        self.blocks = ModuleList(blocks)
        self.stage_names = list(names)
        self.freeze()

    def freeze(self):
        for p in self.parameters():
            p.requires_grad = False
        return self

    def features(self, image):
        """Return [(name, feature tensor)] for every stage."""
        out = []
        x = image
        for name, block in zip(self.stage_names, self.blocks):
            x = block(x)
            out.append((name, x))
        return out


class _IdentityStage(Module):
    def forward(self, x):
        return x


def identity_extractor():
    """Single stage passing the image through (used in tests/reductions)."""
    fx = FeatureExtractor([_IdentityStage()], ["image"])
    return fx


DEFAULT_EXTRACTOR_CHANNELS = (8, 16, 32, 32, 32)


def build_default_extractor(seed=0):
    """Five fixed-seed conv/relu/downsample stages.

    Convolution weights are drawn orthonormal across output channels so
    distinct images map to distinct features; the same seed always
    yields bit-identical stages.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    cin = 3
    for cout in DEFAULT_EXTRACTOR_CHANNELS:
        stage = _ConvStage(cin, cout, rng)
        flat = orthogonalish(rng, cout, cin * 9).astype(np.float32)
        stage.conv.weight.data = flat.reshape(cout, cin, 3, 3)
        stage.conv.bias.data[:] = 0.0
        blocks.append(stage)
        cin = cout
    names = [f"stage{i + 1}" for i in range(len(blocks))]
    return FeatureExtractor(blocks, names)


# ----------------------------------------------------------------------
# optional hook: a VGG-16 topology fed from user-supplied weights

_VGG16_LAYOUT = (
    # (stage name, conv channel plan); captures fire after the first conv
    # of each scale, with 2x pooling between scales
    ("relu1_1", [(3, 64)]),
    ("relu2_1", [(64, 64), "pool", (64, 128)]),
    ("relu3_1", [(128, 128), "pool", (128, 256)]),
    ("relu4_1", [(256, 256), (256, 256), "pool", (256, 512)]),
    ("relu5_1", [(512, 512), (512, 512), "pool", (512, 512)]),
)


class _VggStage(Module):
    def __init__(self, plan, rng):
        super().__init__()
        convs = []
        self.steps = []
        for item in plan:
            if item == "pool":
                self.steps.append("pool")
            else:
                cin, cout = item
                convs.append(Conv2d(cin, cout, 3, rng, padding=1))
                self.steps.append("conv")
        self.convs = ModuleList(convs)

    def forward(self, x):
        it = iter(self.convs)
        for step in self.steps:
            if step == "pool":
                x = ops.avg_down(x, 2)
            else:
                x = ops.relu(next(it)(x))
        return x


def vgg16_extractor(weights_path):
    """Build the VGG-16 feature topology from a checkpoint archive.

    The archive must contain ``conv<i>.weight``/``conv<i>.bias`` for the
    13 convolutions in order. Stages are captured after each scale's
    first activation. Inputs are [-1,1] images, internally shifted to
    ImageNet normalization.
    """
    rng = np.random.default_rng(0)
    stages = [_VggStage(plan, rng) for _, plan in _VGG16_LAYOUT]
    names = [name for name, _ in _VGG16_LAYOUT]
    fx = _Vgg16Extractor(stages, names)
    arrays, _meta = load_checkpoint(weights_path)
    convs = [c for stage in stages for c in stage.convs]
    for i, conv in enumerate(convs):
        w = arrays.get(f"conv{i}.weight")
        b = arrays.get(f"conv{i}.bias")
        if w is None or b is None:
            raise ValueError(f"weights archive is missing conv{i}.weight/bias")
        if tuple(w.shape) != conv.weight.shape:
            raise ValueError(
                f"conv{i}.weight has shape {tuple(w.shape)}, expected {conv.weight.shape}"
            )
        conv.weight.data = w.astype(np.float32)
        conv.bias.data = b.astype(np.float32)
    fx.freeze()
    return fx


class _Vgg16Extractor(FeatureExtractor):
    def features(self, image):
        mean = Tensor(np.array(IMAGENET_MEAN, dtype=np.float32).reshape(1, 3, 1, 1))
        inv_std = Tensor(
            (1.0 / np.array(IMAGENET_STD, dtype=np.float32)).reshape(1, 3, 1, 1)
        )
        x = mul(sub(mul(add(image, 1.0), 0.5), mean), inv_std)
        out = []
        for name, block in zip(self.stage_names, self.blocks):
            x = block(x)
            out.append((name, x))
        return out


# ----------------------------------------------------------------------
# loss terms


def l1_loss(pred, target):
    """Mean absolute difference over all elements."""
    if pred.shape != target.shape:
        raise ValueError(f"l1_loss shapes differ: {pred.shape} vs {target.shape}")
    return absolute(sub(pred, target)).mean()


def perceptual_loss(pred, target, extractor):
    """Sum over stages of the per-element L1 distance between features."""
    terms = None
    feats_p = extractor.features(pred)
    feats_t = extractor.features(target)
    for (_, fp), (_, ft) in zip(feats_p, feats_t):
        term = absolute(sub(fp, ft)).mean()
        terms = term if terms is None else add(terms, term)
    return terms


def style_loss(pred, target, extractor):
    """As perceptual_loss, but on Gram matrices of each stage's features."""
    terms = None
    feats_p = extractor.features(pred)
    feats_t = extractor.features(target)
    for (_, fp), (_, ft) in zip(feats_p, feats_t):
        term = absolute(sub(ops.gram_matrix(fp), ops.gram_matrix(ft))).mean()
        terms = term if terms is None else add(terms, term)
    return terms


def rals_adversarial(real_scores, fake_scores, side):
    """Relativistic-average least-squares objective on patch score maps.

    Discriminator: real scores should sit one above the mean fake score
    and fake scores one below the mean real score; the generator side
    swaps the roles. Minimum value 0; equal constant scores give 2.
    """
    if real_scores.shape != fake_scores.shape:
        raise ValueError(
            f"score shapes differ: {real_scores.shape} vs {fake_scores.shape}"
        )
    mean_real = real_scores.mean()
    mean_fake = fake_scores.mean()
    rel_real = sub(real_scores, mean_fake)
    rel_fake = sub(fake_scores, mean_real)
    if side == "discriminator":
        return add(
            ((rel_real - 1.0) ** 2.0).mean(), ((rel_fake + 1.0) ** 2.0).mean()
        )
    if side == "generator":
        return add(
            ((rel_fake - 1.0) ** 2.0).mean(), ((rel_real + 1.0) ** 2.0).mean()
        )
    raise ValueError(f"side must be 'generator' or 'discriminator', got {side!r}")


def total_generator_loss(pred, target, scores, weights, extractor):
    """Weighted sum of the enabled loss terms.

    ``scores`` is a (real_scores, fake_scores) pair, or None when the
    adversarial weight is zero. Terms with zero weight are skipped
    entirely and reported as 0. Returns (scalar tensor, report dict of
    unweighted float terms plus "total").
    """
    report = {"l1": 0.0, "perceptual": 0.0, "style": 0.0, "adversarial": 0.0}
    total = None

    def accumulate(total_t, term, weight, name):
        report[name] = float(term.data)
        weighted = mul(term, weight)
        return weighted if total_t is None else add(total_t, weighted)

    if weights.l1 > 0:
        total = accumulate(total, l1_loss(pred, target), weights.l1, "l1")
    if weights.perceptual > 0:
        total = accumulate(
            total, perceptual_loss(pred, target, extractor), weights.perceptual, "perceptual"
        )
    if weights.style > 0:
        total = accumulate(total, style_loss(pred, target, extractor), weights.style, "style")
    if weights.adversarial > 0:
        if scores is None:
            raise ValueError("adversarial weight > 0 needs discriminator scores")
        real_scores, fake_scores = scores
        term = rals_adversarial(real_scores, fake_scores, "generator")
        total = accumulate(total, term, weights.adversarial, "adversarial")
    if total is None:
        total = Tensor(np.zeros((), dtype=pred.dtype))
    report["total"] = float(total.data)
    return total, report
