"""Training configuration and the alternating GAN training loop."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, NumericError
from .losses import LossWeights, build_default_extractor, rals_adversarial, total_generator_loss
from .network import Generator, GeneratorConfig, PatchDiscriminator
from .optim import Adam
from .tensor import Tensor

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on, in one round-trippable record."""

    manifest: str
    checkpoint_dir: str
    log_csv: str
    mask_dir: str | None = None  # None -> procedural brush masks
    mask_ratio: float = 0.25
    mask_invert: bool = False
    image_size: int = 64
    base_channels: int = 32
    n_regions: int = 16
    r: int = 4
    lga_placement: str = "encoder"
    attention: str = "ra"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 1e-4
    adam_betas: tuple = (0.5, 0.999)
    batch_size: int = 4
    steps: int = 200
    seed: int = 0
    checkpoint_every: int = 100
    extractor_seed: int = 0
    schema_version: int = CONFIG_SCHEMA_VERSION

    def validate(self):
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(
                f"config schema_version {self.schema_version} unsupported "
                f"(expected {CONFIG_SCHEMA_VERSION})"
            )
        if not Path(self.manifest).exists():
            raise ConfigError(f"manifest {self.manifest} does not exist")
        if self.mask_dir is not None and not Path(self.mask_dir).is_dir():
            raise ConfigError(f"mask_dir {self.mask_dir} is not a directory")
        for name in ("image_size", "base_channels", "n_regions", "r", "batch_size",
                     "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0.0 < self.mask_ratio <= 0.6:
            raise ConfigError("mask_ratio must be in (0, 0.6]")
        try:
            self.generator_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.loss_weights.adversarial > 0 and self.image_size < 64:
            raise ConfigError(
                "adversarial training needs image_size >= 64 (discriminator minimum)"
            )
        return self

    def generator_config(self):
        return GeneratorConfig(
            base_channels=self.base_channels,
            image_size=self.image_size,
            lga_placement=self.lga_placement,
            attention=self.attention,
            n_regions=self.n_regions,
            r=self.r,
        )

    # -- lossless JSON round trip ------------------------------------
    def to_dict(self):
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        try:
            if "loss_weights" in d and isinstance(d["loss_weights"], dict):
                d["loss_weights"] = LossWeights(**d["loss_weights"])
            if "adam_betas" in d:
                d["adam_betas"] = tuple(d["adam_betas"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad training config: {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)


@dataclass
class TrainResult:
    final_checkpoint: str
    log_csv: str
    steps_run: int
    history: list


LOG_COLUMNS = ("step", "d_loss", "l1", "perceptual", "style", "adversarial", "g_total")


class _Dataset:
    """Decoded-image cache over a manifest plus a mask source."""

    def __init__(self, config):
        self.entries = data.read_manifest(config.manifest)
        self.size = config.image_size
        self._cache = {}
        self.mask_paths = None
        if config.mask_dir is not None:
            self.mask_paths = sorted(
                p for p in Path(config.mask_dir).iterdir()
                if p.suffix.lower() in (".png", ".jpg", ".jpeg")
            )
            if not self.mask_paths:
                raise ConfigError(f"mask_dir {config.mask_dir} holds no images")
        self.config = config

    def __len__(self):
        return len(self.entries)

    def image(self, idx):
        path = self.entries[idx]
        if path not in self._cache:
            self._cache[path] = data.load_image(path, self.size)
        return self._cache[path]

    def mask(self, rng):
        if self.mask_paths is not None:
            path = self.mask_paths[int(rng.integers(len(self.mask_paths)))]
            return data.load_mask(path, self.size, invert=self.config.mask_invert)
        return data.generate_mask(
            int(rng.integers(2**31)), self.size, self.config.mask_ratio
        )

    def batch(self, batch_rng, augment_seed):
        idxs = batch_rng.integers(0, len(self.entries), size=self.config.batch_size)
        gts, masks = [], []
        for j, idx in enumerate(idxs):
            sample = data.make_sample(self.image(int(idx)), self.mask(batch_rng))
            sample = data.augment(sample, augment_seed * 1000003 + j)
            gts.append(sample.gt.data)
            masks.append(sample.mask.data)
        return (
            Tensor(np.stack(gts)),
            Tensor(np.stack(masks)),
        )


def _check_finite(report, step, last_ckpt):
    for name, value in report.items():
        if not math.isfinite(value):
            raise NumericError(
                f"non-finite {name} loss at step {step}"
                + (f"; last good checkpoint: {last_ckpt}" if last_ckpt else "")
            )


def train(config):
    """Run the configured training loop; returns a TrainResult.

    Alternates one discriminator and one generator Adam step when the
    adversarial weight is positive; with it at zero the discriminator is
    skipped entirely (which also lifts its 64px input minimum). Fully
    deterministic given the seed. A non-finite loss aborts with the last
    good checkpoint retained on disk.
    """
    config.validate()
    seed_root = np.random.SeedSequence(config.seed)
    init_ss, data_ss, order_ss = seed_root.spawn(3)
    init_rng = np.random.default_rng(init_ss)

    dataset = _Dataset(config)
    generator = Generator(config.generator_config(), init_rng)
    weights = config.loss_weights
    adversarial = weights.adversarial > 0
    discriminator = PatchDiscriminator(init_rng) if adversarial else None
    extractor = (
        build_default_extractor(config.extractor_seed)
        if (weights.perceptual > 0 or weights.style > 0)
        else None
    )
    g_opt = Adam(list(generator.parameters()), lr=config.lr, betas=config.adam_betas)
    d_opt = (
        Adam(list(discriminator.parameters()), lr=config.lr, betas=config.adam_betas)
        if adversarial
        else None
    )

    ckpt_dir = Path(config.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_path = Path(config.log_csv)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    def write_checkpoint(name, step):
        tensors = {f"generator.{k}": v for k, v in generator.state_dict().items()}
        if discriminator is not None:
            tensors.update(
                {f"discriminator.{k}": v for k, v in discriminator.state_dict().items()}
            )
        meta = {"config": config.to_dict(), "step": step}
        path = ckpt_dir / name
        try:
            save_checkpoint(path, tensors, meta)
        except ValueError as exc:
            raise NumericError(f"at step {step}: {exc}") from exc
        return str(path)

    last_ckpt = write_checkpoint("step_000000.ckpt", 0)
    history = []
    batch_rng = np.random.default_rng(data_ss)
    order_rng = np.random.default_rng(order_ss)

    with log_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for step in range(1, config.steps + 1):
            gt, mask = dataset.batch(batch_rng, int(order_rng.integers(2**31)))
            corrupted = Tensor(gt.data * mask.data)
            pred, _ = generator(corrupted, mask)

            d_loss_val = 0.0
            scores = None
            if adversarial:
                real_scores = discriminator(gt)
                fake_scores = discriminator(pred.detach())
                d_loss = rals_adversarial(real_scores, fake_scores, "discriminator")
                d_loss_val = float(d_loss.data)
                d_opt.zero_grad()
                d_loss.backward()
                d_opt.step()
                scores = (discriminator(gt), discriminator(pred))

            g_loss, report = total_generator_loss(pred, gt, scores, weights, extractor)
            g_opt.zero_grad()
            if d_opt is not None:
                d_opt.zero_grad()  # drop gradients leaked through the G objective
            g_loss.backward()
            g_opt.step()

            report["d_loss"] = d_loss_val
            _check_finite(report, step, last_ckpt)
            row = [step] + [repr(report[c]) for c in LOG_COLUMNS[1:-1]] + [repr(report["total"])]
            writer.writerow(row)
            history.append(dict(report, step=step))

            if step % config.checkpoint_every == 0:
                last_ckpt = write_checkpoint(f"step_{step:06d}.ckpt", step)

    final = write_checkpoint("final.ckpt", config.steps)
    return TrainResult(
        final_checkpoint=final,
        log_csv=str(log_path),
        steps_run=config.steps,
        history=history,
    )


def load_generator(checkpoint_path):
    """Rebuild the generator recorded in a checkpoint's manifest."""
    tensors, meta = load_checkpoint(checkpoint_path)
    cfg_dict = meta.get("config")
    if not cfg_dict:
        raise ConfigError(f"checkpoint {checkpoint_path} carries no config")
    config = TrainConfig.from_dict(cfg_dict)
    generator = Generator(config.generator_config(), np.random.default_rng(0))
    gen_state = {
        k[len("generator."):]: v for k, v in tensors.items() if k.startswith("generator.")
    }
    generator.load_state_dict(gen_state)
    generator.eval()
    return generator, config
