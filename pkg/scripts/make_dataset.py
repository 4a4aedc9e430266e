#!/usr/bin/env python3
"""Generate the synthetic textured-digit dataset as IDX file pairs.

Writes train-images.idx / train-labels.idx / test-images.idx /
test-labels.idx into --out, ready for `advcraft train --format mnist`.
"""

import argparse
import os

from advcraft.datasets import write_idx_images, write_idx_labels
from advcraft.synth import make_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train-count", type=int, default=10000)
    parser.add_argument("--test-count", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="data")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    train_images, train_labels = make_dataset(args.train_count, args.seed)
    test_images, test_labels = make_dataset(args.test_count, args.seed, start=args.train_count)

    write_idx_images(os.path.join(args.out, "train-images.idx"), train_images)
    write_idx_labels(os.path.join(args.out, "train-labels.idx"), train_labels)
    write_idx_images(os.path.join(args.out, "test-images.idx"), test_images)
    write_idx_labels(os.path.join(args.out, "test-labels.idx"), test_labels)
    print(f"wrote {args.train_count} train / {args.test_count} test samples to {args.out}/")


if __name__ == "__main__":
    main()
