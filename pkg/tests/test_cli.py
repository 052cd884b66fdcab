"""CLI surface: subcommands, exit codes, artifacts, figures."""

import csv
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from conftest import toy_config, write_dataset
from regionfill import data
from regionfill.cli import main
from regionfill.tensor import Tensor


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One short training run shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    write_dataset(root)
    cfg = toy_config(root, "cli", steps=4, checkpoint_every=100)
    cfg_path = root / "train.json"
    cfg.save(cfg_path)
    code = main(["train", "--config", str(cfg_path)])
    assert code == 0
    mask = data.generate_mask(3, 32, 0.25)
    data.save_mask(mask, root / "mask.png")
    mask_dir = root / "masks"
    mask_dir.mkdir()
    data.save_mask(mask, mask_dir / "m0.png")
    return {
        "root": root,
        "ckpt": str(root / "ckpt_cli" / "final.ckpt"),
        "image": str(root / "imgs" / "img0.png"),
        "mask": str(root / "mask.png"),
        "mask_dir": str(mask_dir),
        "manifest": str(root / "manifest.txt"),
    }


def test_train_writes_log_and_figure(trained):
    root = trained["root"]
    assert (root / "log_cli.csv").exists()
    assert (root / "log_cli.png").exists()


def test_infer_roundtrip_with_full_mask(trained, tmp_path):
    root = trained["root"]
    full_mask = tmp_path / "full.png"
    Image.new("L", (32, 32), 255).save(full_mask)
    out = tmp_path / "out.png"
    code = main([
        "infer", "--ckpt", trained["ckpt"], "--image", trained["image"],
        "--mask", str(full_mask), "--out", str(out),
    ])
    assert code == 0
    original = data.load_image(trained["image"], 32)
    produced = data.load_image(out, 32)
    # all-known mask: output equals input up to 8-bit quantization
    assert np.abs(original.data - produced.data).max() <= 2 / 255 + 1e-6


def test_infer_deterministic(trained, tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}.png"
        code = main([
            "infer", "--ckpt", trained["ckpt"], "--image", trained["image"],
            "--mask", trained["mask"], "--out", str(out),
        ])
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    with Image.open(tmp_path / "o0.png") as im:
        assert im.size == (32, 32)


def test_viz_rm_emits_2n_plus_1_maps(trained, tmp_path):
    out_dir = tmp_path / "viz"
    code = main([
        "viz-rm", "--ckpt", trained["ckpt"], "--image", trained["image"],
        "--mask", trained["mask"], "--out-dir", str(out_dir),
    ])
    assert code == 0
    n = 4  # toy config regions
    rm_maps = sorted(out_dir.glob("layer0_rm_*.png"))
    coarse_maps = sorted(out_dir.glob("layer0_coarse_*.png"))
    argmax = list(out_dir.glob("layer0_argmax.png"))
    assert len(rm_maps) == n and len(coarse_maps) == n and len(argmax) == 1
    assert (out_dir / "layer0_overlay.png").exists()
    with Image.open(rm_maps[0]) as im:
        assert im.mode == "L"
        arr = np.asarray(im)
    assert arr.min() >= 0 and arr.max() <= 255


def test_viz_rm_layer_out_of_range(trained, tmp_path):
    code = main([
        "viz-rm", "--ckpt", trained["ckpt"], "--image", trained["image"],
        "--mask", trained["mask"], "--out-dir", str(tmp_path / "v2"), "--layer", "7",
    ])
    assert code == 2


def test_eval_writes_rows_summary_figure(trained, tmp_path):
    out_csv = tmp_path / "eval.csv"
    code = main([
        "eval", "--ckpt", trained["ckpt"], "--manifest", trained["manifest"],
        "--masks", trained["mask_dir"], "--out-csv", str(out_csv),
    ])
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 4
    assert list(rows[0]) == ["sample_id", "bin", "l1_pct", "psnr", "ssim"]
    summary = list(csv.DictReader((tmp_path / "eval_summary.csv").open()))
    assert [r["bin"] for r in summary] == ["10-20%", "20-30%", "30-40%", "40-50%", "other"]
    empty = [r for r in summary if int(r["count"]) == 0]
    assert all(r["l1_pct"] == "NA" for r in empty)
    assert (tmp_path / "eval.png").exists()


def test_eval_idempotent_bytes(trained, tmp_path):
    paths = []
    for i in range(2):
        out_csv = tmp_path / f"e{i}.csv"
        code = main([
            "eval", "--ckpt", trained["ckpt"], "--manifest", trained["manifest"],
            "--masks", trained["mask_dir"], "--out-csv", str(out_csv),
        ])
        assert code == 0
        paths.append(out_csv.read_bytes())
    assert paths[0] == paths[1]


def test_eval_identity_bypass(trained, tmp_path):
    out_csv = tmp_path / "id.csv"
    code = main([
        "eval", "--identity", "--image-size", "32", "--manifest", trained["manifest"],
        "--masks", trained["mask_dir"], "--out-csv", str(out_csv),
    ])
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    for row in rows:
        assert float(row["l1_pct"]) == 0.0
        assert float(row["psnr"]) == float("inf")
        assert float(row["ssim"]) == 1.0


def test_bench_csv_and_slopes(tmp_path):
    out_csv = tmp_path / "bench.csv"
    code = main(["bench", "--sizes", "16,32", "--n", "8", "--channels", "16",
                 "--out-csv", str(out_csv)])
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 2
    for row in rows:
        assert row["ra_flops_analytic"] == row["ra_flops_measured"]
        assert row["cam_flops_analytic"] == row["cam_flops_measured"]
    assert (tmp_path / "bench.png").exists()


def test_exit_code_2_on_bad_inputs(tmp_path):
    assert main(["train", "--config", str(tmp_path / "none.json")]) == 2
    assert main(["bench", "--sizes", "15", "--out-csv", str(tmp_path / "b.csv")]) == 2
    assert main(["eval", "--manifest", "x", "--masks", "y", "--out-csv", "z"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_exit_code_3_on_numeric_failure(tmp_path):
    write_dataset(tmp_path)
    cfg = toy_config(tmp_path, "nan", steps=50, lr=1e30, checkpoint_every=1000)
    cfg_path = tmp_path / "bad.json"
    cfg.save(cfg_path)
    assert main(["train", "--config", str(cfg_path)]) == 3


def test_thread_env_var_binds_blas_pools(tmp_path):
    import os
    import subprocess
    import sys

    env = {k: v for k, v in os.environ.items() if not k.endswith("_NUM_THREADS")}
    env["REGIONFILL_THREADS"] = "2"
    out = subprocess.run(
        [sys.executable, "-c", "import regionfill, os; print(os.environ['OMP_NUM_THREADS'])"],
        env=env,
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert out.stdout.strip() == "2"


def test_mask_invert_flag(trained, tmp_path):
    # inverted mask interpretation must change the output
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    for out, flags in ((out_a, []), (out_b, ["--mask-invert"])):
        code = main([
            "infer", "--ckpt", trained["ckpt"], "--image", trained["image"],
            "--mask", trained["mask"], "--out", str(out), *flags,
        ])
        assert code == 0
    assert out_a.read_bytes() != out_b.read_bytes()
