#!/usr/bin/env python3
"""Write a small synthetic dataset (smooth dark images) plus a manifest.

Usage: python3 tools/make_toy_dataset.py <out_dir> [--count 4] [--size 32]
"""

import argparse
from pathlib import Path

import numpy as np

from regionfill import data
from regionfill.tensor import Tensor


def synth_image(i, size):
    rng = np.random.default_rng(100 + i)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    tones = (-0.30, -0.27, -0.33, -0.24)
    tone = tones[i % len(tones)]
    img = np.stack(
        [
            tone + 0.05 * np.sin(2 * np.pi * (0.5 * yy + rng.uniform(0, 1))),
            tone + 0.05 * np.cos(2 * np.pi * (0.5 * xx + rng.uniform(0, 1))),
            tone + 0.04 * (yy - 0.5) + 0.04 * (xx - 0.5),
        ]
    ).astype(np.float32)
    return np.clip(img, -1, 1)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--count", type=int, default=4)
    parser.add_argument("--size", type=int, default=32)
    args = parser.parse_args()

    out = Path(args.out_dir)
    imgdir = out / "imgs"
    imgdir.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(args.count):
        name = f"imgs/img{i}.png"
        data.save_image(Tensor(synth_image(i, args.size)), out / name)
        names.append(name)
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(names) + "\n")
    print(f"wrote {args.count} images and {manifest}")


if __name__ == "__main__":
    main()
