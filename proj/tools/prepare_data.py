#!/usr/bin/env python3
"""Build MNIST IDX files from the `mnist` npm package's bundled digits.

The npm package ships each digit as a JSON array of flattened 28x28
grayscale images with values in [0, 1]. This script splits every digit
class into train/test deterministically (first train-frac of the bundled
order goes to train) and writes the four canonical IDX files the CLI
expects:

    train-images-idx3-ubyte  train-labels-idx1-ubyte
    t10k-images-idx3-ubyte   t10k-labels-idx1-ubyte

Usage:
    npm install mnist
    python tools/prepare_data.py --source node_modules/mnist/src/digits --out data
"""

import argparse
import json
import struct
import sys
from pathlib import Path

SIDE = 28
PIXELS = SIDE * SIDE


def load_digit(source: Path, digit: int):
    """One digit file holds {"data": [v, ...]} — a flat list of n*784
    grayscale values in [0, 1]."""
    path = source / f"{digit}.json"
    if not path.is_file():
        sys.exit(f"error: {path} not found (run `npm install mnist` and point "
                 f"--source at node_modules/mnist/src/digits)")
    with open(path) as f:
        flat = json.load(f)["data"]
    if len(flat) % PIXELS != 0:
        sys.exit(f"error: {path} length {len(flat)} is not a multiple of {PIXELS}")
    return [flat[i:i + PIXELS] for i in range(0, len(flat), PIXELS)]


def to_bytes(img):
    return bytes(min(255, max(0, round(v * 255))) for v in img)


def write_idx_images(path: Path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)


def write_idx_labels(path: Path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--source", required=True, type=Path,
                    help="digits directory of the mnist npm package")
    ap.add_argument("--out", default=Path("data"), type=Path,
                    help="output directory for the IDX files (default: data)")
    ap.add_argument("--train-frac", default=0.8, type=float,
                    help="fraction of each digit class used for training")
    args = ap.parse_args()

    if not 0.0 < args.train_frac < 1.0:
        sys.exit("error: --train-frac must be in (0, 1)")
    args.out.mkdir(parents=True, exist_ok=True)

    train_imgs, train_labels, test_imgs, test_labels = [], [], [], []
    for digit in range(10):
        images = load_digit(args.source, digit)
        cut = int(len(images) * args.train_frac)
        if cut == 0 or cut == len(images):
            sys.exit(f"error: digit {digit} has too few images ({len(images)})")
        for img in images[:cut]:
            train_imgs.append(to_bytes(img))
            train_labels.append(digit)
        for img in images[cut:]:
            test_imgs.append(to_bytes(img))
            test_labels.append(digit)
        print(f"digit {digit}: {cut} train, {len(images) - cut} test")

    write_idx_images(args.out / "train-images-idx3-ubyte", train_imgs)
    write_idx_labels(args.out / "train-labels-idx1-ubyte", train_labels)
    write_idx_images(args.out / "t10k-images-idx3-ubyte", test_imgs)
    write_idx_labels(args.out / "t10k-labels-idx1-ubyte", test_labels)
    print(f"wrote {len(train_imgs)} train / {len(test_imgs)} test images to {args.out}")


if __name__ == "__main__":
    main()
