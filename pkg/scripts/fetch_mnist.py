#!/usr/bin/env python3
"""Download the MNIST IDX files (optional convenience; needs network).

The toolkit itself never touches the network.  If your environment has no
internet access, use scripts/make_dataset.py instead, which generates a
local synthetic dataset with the same file layout.
"""

import argparse
import gzip
import os
import urllib.request

FILES = {
    "train-images.idx": "train-images-idx3-ubyte.gz",
    "train-labels.idx": "train-labels-idx1-ubyte.gz",
    "test-images.idx": "t10k-images-idx3-ubyte.gz",
    "test-labels.idx": "t10k-labels-idx1-ubyte.gz",
}
DEFAULT_MIRROR = "https://storage.googleapis.com/cvdf-datasets/mnist/"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mirror", default=DEFAULT_MIRROR)
    parser.add_argument("--out", default="data")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for local, remote in FILES.items():
        url = args.mirror.rstrip("/") + "/" + remote
        target = os.path.join(args.out, local)
        print(f"fetching {url}")
        with urllib.request.urlopen(url) as response:
            payload = gzip.decompress(response.read())
        tmp = f"{target}.tmp.{os.getpid()}"
        with open(tmp, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, target)
        print(f"  wrote {target} ({len(payload)} bytes)")


if __name__ == "__main__":
    main()
