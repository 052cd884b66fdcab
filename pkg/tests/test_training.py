"""Training loop: determinism, checkpoints, abort semantics, config."""

from pathlib import Path

import numpy as np
import pytest

from conftest import toy_config, write_dataset
from regionfill.checkpoint import load_checkpoint
from regionfill.errors import ConfigError, NumericError
from regionfill.losses import LossWeights
from regionfill.training import LOG_COLUMNS, TrainConfig, load_generator, train


def test_same_seed_bit_identical_curves(dataset_dir):
    r1 = train(toy_config(dataset_dir, "a", steps=8, seed=3))
    r2 = train(toy_config(dataset_dir, "b", steps=8, seed=3))
    assert Path(r1.log_csv).read_bytes() == Path(r2.log_csv).read_bytes()


def test_different_seed_differs(dataset_dir):
    r1 = train(toy_config(dataset_dir, "a", steps=4, seed=1))
    r2 = train(toy_config(dataset_dir, "b", steps=4, seed=2))
    assert Path(r1.log_csv).read_bytes() != Path(r2.log_csv).read_bytes()


def test_zero_steps_checkpoint_equals_init(dataset_dir):
    result = train(toy_config(dataset_dir, "z", steps=0))
    init, _ = load_checkpoint(Path(result.final_checkpoint).parent / "step_000000.ckpt")
    final, meta = load_checkpoint(result.final_checkpoint)
    assert set(init) == set(final)
    for k in init:
        np.testing.assert_array_equal(init[k], final[k])
    assert meta["step"] == 0


def test_periodic_checkpoints_written(dataset_dir):
    result = train(toy_config(dataset_dir, "p", steps=6, checkpoint_every=3))
    ckpts = sorted(p.name for p in Path(result.final_checkpoint).parent.iterdir())
    assert "step_000003.ckpt" in ckpts and "step_000006.ckpt" in ckpts


def test_log_columns_and_length(dataset_dir):
    result = train(toy_config(dataset_dir, "log", steps=5))
    lines = Path(result.log_csv).read_text().strip().splitlines()
    assert lines[0] == ",".join(LOG_COLUMNS)
    assert len(lines) == 6
    assert len(result.history) == 5


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
def test_nan_abort_keeps_last_checkpoint(dataset_dir):
    # an absurd learning rate overflows the parameters within a few steps
    cfg = toy_config(dataset_dir, "nan", steps=50, lr=1e30, checkpoint_every=1000)
    with pytest.raises(NumericError, match="step"):
        train(cfg)
    assert (Path(cfg.checkpoint_dir) / "step_000000.ckpt").exists()


def test_checkpoint_carries_config(dataset_dir):
    cfg = toy_config(dataset_dir, "meta", steps=2)
    result = train(cfg)
    _, meta = load_checkpoint(result.final_checkpoint)
    assert TrainConfig.from_dict(meta["config"]) == cfg
    gen, loaded_cfg = load_generator(result.final_checkpoint)
    assert loaded_cfg.image_size == cfg.image_size


def test_adversarial_config_at_small_size_rejected(dataset_dir):
    cfg = toy_config(dataset_dir, "adv32", loss_weights=LossWeights(1, 0, 0, 0.1))
    with pytest.raises(ConfigError, match="64"):
        train(cfg)


def test_missing_manifest_rejected(tmp_path):
    cfg = toy_config(tmp_path, "x")
    bad = TrainConfig.from_dict({**cfg.to_dict(), "manifest": str(tmp_path / "none.txt")})
    with pytest.raises(ConfigError, match="manifest"):
        bad.validate()


def test_config_json_roundtrip(tmp_path):
    write_dataset(tmp_path)
    cfg = toy_config(tmp_path, "rt", loss_weights=LossWeights(1.0, 0.25, 120.0, 0.05))
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert TrainConfig.load(path) == cfg


def test_bad_config_values(tmp_path):
    write_dataset(tmp_path)
    base = toy_config(tmp_path, "bad").to_dict()
    for field, value in (
        ("steps", -1),
        ("lr", 0.0),
        ("batch_size", 0),
        ("mask_ratio", 0.9),
        ("schema_version", 5),
    ):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({**base, field: value}).validate()


def test_mask_dir_source(dataset_dir):
    from regionfill import data

    mask_dir = dataset_dir / "masks"
    mask_dir.mkdir()
    for i in range(2):
        data.save_mask(data.generate_mask(i, 32, 0.25), mask_dir / f"m{i}.png")
    cfg = toy_config(dataset_dir, "maskdir", steps=3, mask_dir=str(mask_dir))
    result = train(cfg)
    assert result.steps_run == 3


def test_cam_ablation_smoke_run(dataset_dir):
    cfg = toy_config(
        dataset_dir, "cam", steps=3, attention="cam",
        loss_weights=LossWeights(1.0, 0.1, 250.0, 0.0),
    )
    result = train(cfg)
    assert result.steps_run == 3
    assert all(np.isfinite(h["total"]) for h in result.history)
