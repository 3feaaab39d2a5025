#!/usr/bin/env python3
"""Convert the digit JSON files of the npm `mnist` package into gzipped IDX files.

Each src/digits/<k>.json holds {"data": [...]} with 784 values in [0, 1] per
image. Images are shuffled with a fixed seed and split into train/test files
named like the standard MNIST distribution.
"""
import argparse
import gzip
import json
import random
import struct
from pathlib import Path


def write_idx(path: Path, dims, payload: bytes, magic_type=0x08):
    header = struct.pack(">I", (magic_type << 8) | len(dims)) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", compresslevel=9, mtime=0) as f:
        f.write(header + payload)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("digits_dir", type=Path, help="directory with 0.json ... 9.json")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--test", type=int, default=2000, help="number of test images")
    ap.add_argument("--seed", type=int, default=20240531)
    args = ap.parse_args()

    samples = []
    for label in range(10):
        values = json.loads((args.digits_dir / f"{label}.json").read_text())["data"]
        if len(values) % 784:
            raise SystemExit(f"{label}.json: length {len(values)} is not a multiple of 784")
        for i in range(0, len(values), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in values[i : i + 784])
            samples.append((pixels, label))

    random.Random(args.seed).shuffle(samples)
    test, train = samples[: args.test], samples[args.test :]
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for prefix, part in (("train", train), ("t10k", test)):
        write_idx(args.out_dir / f"{prefix}-images-idx3-ubyte.gz", (len(part), 28, 28), b"".join(p for p, _ in part))
        write_idx(args.out_dir / f"{prefix}-labels-idx1-ubyte.gz", (len(part),), bytes(l for _, l in part))
    print(f"wrote {len(train)} train / {len(test)} test images to {args.out_dir}")


if __name__ == "__main__":
    main()
