"""Command-line interface: train, infer, eval, viz-rm, and bench.

Report-producing subcommands render a matplotlib figure next to their
delimited output. Exit codes: 0 ok, 2 config/input error, 3 numeric
failure. Set REGIONFILL_THREADS to cap BLAS threads for the math ops.
"""

from __future__ import annotations

from . import _threads  # noqa: F401  (before numpy binds its thread pool)

import argparse
import sys
from pathlib import Path

from . import data, figures
from .bench import run_benchmark, write_bench_csv
from .errors import ConfigError, NumericError
from .evaluate import evaluate, summarize, write_eval_csv
from .network import composite
from .tensor import Tensor, no_grad
from .training import TrainConfig, load_generator, train
from .viz import export_region_maps


def _cmd_train(args):
    config = TrainConfig.load(args.config)
    result = train(config)
    fig = figures.render_loss_curves(
        result.history, Path(result.log_csv).with_suffix(".png")
    )
    print(f"checkpoint: {result.final_checkpoint}")
    print(f"log: {result.log_csv}")
    if fig:
        print(f"figure: {fig}")
    return 0


def _load_pair(args, image_size, invert):
    image = data.load_image(args.image, image_size)
    mask = data.load_mask(args.mask, image_size, invert=invert)
    return image, mask


def _cmd_infer(args):
    generator, config = load_generator(args.ckpt)
    image, mask = _load_pair(args, config.image_size, args.mask_invert)
    corrupted = Tensor(image.data[None] * mask.data[None])
    mask_b = Tensor(mask.data[None])
    with no_grad():
        pred, _ = generator(corrupted, mask_b)
        comp = composite(corrupted, pred, mask_b)
    data.save_image(Tensor(comp.data[0]), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args):
    generator = None
    if args.identity:
        if args.image_size is None:
            raise ConfigError("--identity needs --image-size (no checkpoint to read it from)")
        image_size = args.image_size
    else:
        if not args.ckpt:
            raise ConfigError("eval needs --ckpt (or --identity)")
        generator, config = load_generator(args.ckpt)
        image_size = config.image_size
    rows = evaluate(
        generator,
        image_size,
        args.manifest,
        args.masks,
        identity=args.identity,
        mask_invert=args.mask_invert,
    )
    summary = summarize(rows)
    csv_path, summary_path = write_eval_csv(rows, summary, args.out_csv)
    fig = figures.render_eval_summary(summary, Path(csv_path).with_suffix(".png"))
    print(f"wrote {csv_path}")
    print(f"wrote {summary_path}")
    print(f"figure: {fig}")
    return 0


def _cmd_viz_rm(args):
    generator, config = load_generator(args.ckpt)
    image, mask = _load_pair(args, config.image_size, args.mask_invert)
    corrupted = Tensor(image.data[None] * mask.data[None])
    with no_grad():
        _, region_masks = generator(corrupted, Tensor(mask.data[None]))
    if not region_masks:
        raise ConfigError(
            "this checkpoint's configuration produces no region masks "
            "(cam attention or no attention layers)"
        )
    if not 0 <= args.layer < len(region_masks):
        raise ConfigError(
            f"--layer {args.layer} out of range; checkpoint has {len(region_masks)} attention layers"
        )
    rm = region_masks[args.layer]
    paths = export_region_maps(rm, args.out_dir, prefix=f"layer{args.layer}")
    fig = figures.render_region_overlay(
        image, rm, Path(args.out_dir) / f"layer{args.layer}_overlay.png"
    )
    print(f"wrote {len(paths)} region maps to {args.out_dir}")
    print(f"figure: {fig}")
    return 0


def _cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        raise ConfigError("--sizes must list at least one feature size")
    for s in sizes:
        if s % 4:
            raise ConfigError(f"bench sizes must be divisible by 4, got {s}")
    result = run_benchmark(sizes, n=args.n, channels=args.channels, patch=args.patch)
    write_bench_csv(result, args.out_csv)
    fig = figures.render_bench_figure(result, Path(args.out_csv).with_suffix(".png"))
    print(f"wrote {args.out_csv}")
    print(f"figure: {fig}")
    print(f"ra_slope={result.ra_slope:.4f} cam_slope={result.cam_slope:.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="regionfill",
        description="Region-aware attention image inpainting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="inpaint one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-invert", action="store_true")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="metrics over a manifest")
    p.add_argument("--ckpt")
    p.add_argument("--manifest", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--identity", action="store_true",
                   help="bypass the model and score ground truth against itself")
    p.add_argument("--image-size", type=int, default=None)
    p.add_argument("--mask-invert", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("viz-rm", help="export region-mask maps for one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--mask-invert", action="store_true")
    p.set_defaults(func=_cmd_viz_rm)

    p = sub.add_parser("bench", help="attention complexity benchmark")
    p.add_argument("--sizes", default="16,32,64,128")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--patch", type=int, default=3)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
