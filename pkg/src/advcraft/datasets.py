"""Dataset ingestion: IDX (MNIST layout), CIFAR-10 binary batches, and
directories of portable anymap images.

All loaders return float64 images in [0, 1] shaped (count, h, w, channels)
with integer label arrays.  Raw bytes scale by exactly 1/255.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ParseError
from .pnm import read_image

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class DatasetHandle:
    name: str
    images: np.ndarray  # (count, h, w, c) float64 in [0, 1]
    labels: np.ndarray  # (count,) int64

    @property
    def count(self) -> int:
        return len(self.images)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])


def _check_labels(labels: np.ndarray, source: str) -> None:
    if labels.size and (labels.min() < 0 or labels.max() > 9):
        raise IntegrityError(f"{source}: label {int(labels.max())} outside [0, 9]")


# --------------------------------------------------------------------------
# IDX


def _read_idx(path: str, magic: int, rank: int) -> np.ndarray:
    with open(path, "rb") as handle:
        data = handle.read()
    header_size = 4 + 4 * rank
    if len(data) < header_size:
        raise ParseError(f"{path}: truncated IDX header", offset=len(data))
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise ParseError(
            f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}", offset=0
        )
    dims = struct.unpack(f">{rank}I", data[4:header_size])
    expected = header_size + int(np.prod(dims))
    if len(data) < expected:
        raise ParseError(
            f"{path}: truncated IDX payload, {len(data)} bytes for {expected} expected",
            offset=len(data),
        )
    return np.frombuffer(data[header_size:expected], dtype=np.uint8).reshape(dims)


def load_mnist(images_path: str, labels_path: str) -> DatasetHandle:
    """Load an IDX image/label pair scaled to [0, 1], shaped (n, h, w, 1)."""
    raw = _read_idx(images_path, IDX_IMAGE_MAGIC, rank=3)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC, rank=1).astype(np.int64)
    if len(raw) != len(labels):
        raise IntegrityError(
            f"{images_path}: {len(raw)} images but {len(labels)} labels"
        )
    _check_labels(labels, labels_path)
    images = raw.astype(np.float64)[..., None] / 255.0
    return DatasetHandle(name="mnist", images=images, labels=labels)


def write_idx_images(path: str, images: np.ndarray) -> None:
    """Write uint8 images shaped (n, h, w) or (n, h, w, 1) in IDX layout."""
    images = np.asarray(images)
    if images.ndim == 4 and images.shape[3] == 1:
        images = images[..., 0]
    if images.ndim != 3 or images.dtype != np.uint8:
        raise IntegrityError(f"IDX images must be uint8 (n, h, w), got {images.shape}")
    payload = struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape) + images.tobytes()
    _atomic_write_bytes(path, payload)


def write_idx_labels(path: str, labels: np.ndarray) -> None:
    labels = np.asarray(labels).astype(np.uint8)
    payload = struct.pack(">II", IDX_LABEL_MAGIC, len(labels)) + labels.tobytes()
    _atomic_write_bytes(path, payload)


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as handle:
        handle.write(payload)
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# CIFAR-10 binary

CIFAR_RECORD = 3073  # 1 label byte + 3 * 32 * 32 pixel bytes


def load_cifar10(batch_paths) -> DatasetHandle:
    """Load CIFAR-10 binary batches: records of one label byte then a
    channel-planar 3x32x32 raster."""
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    chunks, label_chunks = [], []
    for path in batch_paths:
        with open(path, "rb") as handle:
            data = handle.read()
        if len(data) == 0 or len(data) % CIFAR_RECORD != 0:
            raise ParseError(
                f"{path}: size {len(data)} is not a positive multiple of {CIFAR_RECORD}",
                offset=len(data) - len(data) % CIFAR_RECORD,
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        label_chunks.append(records[:, 0].astype(np.int64))
        chunks.append(records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1))
    labels = np.concatenate(label_chunks)
    for path, chunk in zip(batch_paths, label_chunks):
        _check_labels(chunk, str(path))
    images = np.concatenate(chunks).astype(np.float64) / 255.0
    return DatasetHandle(name="cifar10", images=images, labels=labels)


def write_cifar10(path: str, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images (n, 32, 32, 3) and labels as CIFAR-10 records."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.dtype != np.uint8 or images.shape[1:] != (32, 32, 3):
        raise IntegrityError(f"CIFAR images must be uint8 (n, 32, 32, 3), got {images.shape}")
    records = np.empty((len(images), CIFAR_RECORD), dtype=np.uint8)
    records[:, 0] = labels
    records[:, 1:] = images.transpose(0, 3, 1, 2).reshape(len(images), -1)
    _atomic_write_bytes(path, records.tobytes())


# --------------------------------------------------------------------------
# Directory of images


def load_image_dir(path: str) -> DatasetHandle:
    """Load every `<label>_*.pgm` / `<label>_*.ppm` in a directory.

    The leading integer before the first underscore is the label.  All
    images must share one shape.
    """
    names = sorted(
        n for n in os.listdir(path) if n.endswith((".pgm", ".ppm")) and "_" in n
    )
    if not names:
        raise ParseError(f"{path}: no '<label>_*.pgm' or '<label>_*.ppm' files")
    images, labels = [], []
    for name in names:
        prefix = name.split("_", 1)[0]
        try:
            labels.append(int(prefix))
        except ValueError:
            raise ParseError(f"{path}/{name}: file name must start with '<label>_'") from None
        images.append(read_image(os.path.join(path, name)))
    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise IntegrityError(f"{path}: mixed image shapes {sorted(shapes)}")
    labels = np.asarray(labels, dtype=np.int64)
    _check_labels(labels, path)
    return DatasetHandle(name="directory", images=np.stack(images), labels=labels)
