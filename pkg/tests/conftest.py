"""Shared fixtures: synthetic datasets and tiny training configs."""

import numpy as np
import pytest

from regionfill import data
from regionfill.losses import LossWeights
from regionfill.tensor import Tensor
from regionfill.training import TrainConfig


def synth_image(i, size=32):
    """Smooth low-amplitude image around a per-index dark tone."""
    rng = np.random.default_rng(100 + i)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    tone = (-0.30, -0.27, -0.33, -0.24)[i % 4]
    img = np.stack(
        [
            tone + 0.05 * np.sin(2 * np.pi * (0.5 * yy + rng.uniform(0, 1))),
            tone + 0.05 * np.cos(2 * np.pi * (0.5 * xx + rng.uniform(0, 1))),
            tone + 0.04 * (yy - 0.5) + 0.04 * (xx - 0.5),
        ]
    ).astype(np.float32)
    return np.clip(img, -1, 1)


def write_dataset(root, count=4, size=32):
    """Write synthetic images plus a manifest; returns the manifest path."""
    imgdir = root / "imgs"
    imgdir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        data.save_image(Tensor(synth_image(i, size)), imgdir / f"img{i}.png")
    manifest = root / "manifest.txt"
    manifest.write_text("\n".join(f"imgs/img{i}.png" for i in range(count)) + "\n")
    return manifest


def toy_config(root, tag="run", **overrides):
    """A small, fast TrainConfig over the synthetic dataset."""
    size = overrides.pop("image_size", 32)
    manifest = root / "manifest.txt"
    if not manifest.exists():
        write_dataset(root, size=size)
    base = dict(
        manifest=str(manifest),
        checkpoint_dir=str(root / f"ckpt_{tag}"),
        log_csv=str(root / f"log_{tag}.csv"),
        image_size=size,
        base_channels=8,
        n_regions=4,
        loss_weights=LossWeights(1.0, 0.0, 0.0, 0.0),
        lr=1e-4,
        batch_size=2,
        steps=10,
        seed=0,
        checkpoint_every=100,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def dataset_dir(tmp_path):
    write_dataset(tmp_path)
    return tmp_path
