"""Region-aware attention image inpainting on a small autodiff engine."""

from . import _threads  # noqa: F401  (must run before numpy binds BLAS threads)
from .tensor import Tensor, flop_count, no_grad, reset_flops
from .losses import LossWeights, build_default_extractor
from .network import Generator, GeneratorConfig, PatchDiscriminator, composite
from .region import RaConfig, RegionAttention, RegionDictionary, cam_forward
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "no_grad",
    "flop_count",
    "reset_flops",
    "LossWeights",
    "build_default_extractor",
    "Generator",
    "GeneratorConfig",
    "PatchDiscriminator",
    "composite",
    "RaConfig",
    "RegionAttention",
    "RegionDictionary",
    "cam_forward",
    "TrainConfig",
    "train",
    "__version__",
]
