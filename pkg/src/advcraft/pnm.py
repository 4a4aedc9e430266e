"""Binary portable anymap I/O: P5 graymaps and P6 pixmaps, maxval 255.

Float images in [0, 1] quantize to bytes by rounding half away from zero,
so reading a written file and rewriting it is byte-identical.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ParseError


def quantize(image: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8, rounding half away from zero."""
    scaled = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0
    return (np.floor(scaled + 0.5)).astype(np.uint8)


def _tokens(data: bytes, count: int, path: str):
    """First header tokens after the magic, honoring '#' comment lines."""
    pos = 2  # past the magic
    found = []
    while len(found) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if pos == start:
            raise ParseError(f"{path}: truncated header", offset=pos)
        found.append(data[start:pos])
    return found, pos + 1  # single whitespace byte ends the header


def read_image(path: str) -> np.ndarray:
    """Read a binary P5/P6 file into a float64 (h, w, c) image in [0, 1]."""
    with open(path, "rb") as handle:
        data = handle.read()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"{path}: unsupported magic {magic!r}, want P5 or P6", offset=0)
    channels = 1 if magic == b"P5" else 3
    (width, height, maxval), raster_start = _tokens(data, 3, path)
    try:
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError:
        raise ParseError(f"{path}: non-numeric header field", offset=2) from None
    if maxval != 255:
        raise ParseError(f"{path}: unsupported maxval {maxval}, want 255", offset=2)
    expected = width * height * channels
    raster = data[raster_start : raster_start + expected]
    if len(raster) != expected:
        raise ParseError(
            f"{path}: raster has {len(raster)} bytes, expected {expected}",
            offset=raster_start + len(raster),
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return pixels.astype(np.float64) / 255.0


def write_image(path: str, image: np.ndarray) -> None:
    """Write a float [0, 1] image as binary P5 (1 channel) or P6 (3)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise ParseError(f"cannot write image of shape {image.shape} as P5/P6")
    magic = b"P5" if image.shape[2] == 1 else b"P6"
    height, width = image.shape[:2]
    header = magic + f"\n{width} {height}\n255\n".encode("ascii")
    payload = header + quantize(image).tobytes()
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as handle:
        handle.write(payload)
    os.replace(tmp, path)
