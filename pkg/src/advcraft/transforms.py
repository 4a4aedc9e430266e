"""Physical-world image transforms for stress testing adversarial images.

Gaussian noise, separable Gaussian blur, a JPEG-like 8x8 DCT quantization
round trip, contrast and brightness shifts.  All operate on float images
in [0, 1] and return clipped float64 copies.  Only noise is randomized,
and it draws from a portable counter-based generator so a (seed, sigma)
pair reproduces bit-identical output on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import SplitMix64

TRANSFORM_KINDS = ("identity", "noise", "blur", "jpeg", "contrast", "brightness")


def _as_image(image) -> np.ndarray:
    out = np.asarray(image, dtype=np.float64)
    if out.ndim != 3:
        raise ConfigError(f"image must be rank-3 (h, w, c), got shape {out.shape}")
    return out


def add_gaussian_noise(image, std: float, seed: int) -> np.ndarray:
    """Add iid N(0, std^2) noise from the portable generator, then clip."""
    image = _as_image(image)
    if std < 0:
        raise ConfigError(f"noise std must be nonnegative, got {std}")
    if std == 0:
        return image.copy()
    noise = SplitMix64(seed).normals(image.size).reshape(image.shape)
    return np.clip(image + std * noise, 0.0, 1.0)


def _blur_kernel(sigma: float, radius: int) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _blur_axis(image: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(kernel) - 1) // 2
    moved = np.moveaxis(image, axis, 0)
    n = moved.shape[0]
    acc = np.zeros_like(moved)
    weight = np.zeros(n, dtype=np.float64)
    for j, w in zip(range(-radius, radius + 1), kernel):
        src_lo, src_hi = max(0, j), min(n, n + j)
        dst_lo, dst_hi = max(0, -j), min(n, n - j)
        acc[dst_lo:dst_hi] += w * moved[src_lo:src_hi]
        weight[dst_lo:dst_hi] += w
    # Edge taps fall outside the image; renormalize by in-image kernel mass.
    acc /= weight.reshape((n,) + (1,) * (moved.ndim - 1))
    return np.moveaxis(acc, 0, axis)


def gaussian_blur(image, sigma: float, radius: int = 3) -> np.ndarray:
    """Separable Gaussian blur with edge kernels renormalized in-image."""
    image = _as_image(image)
    if sigma <= 0:
        raise ConfigError(f"blur sigma must be positive, got {sigma}")
    if radius < 1:
        raise ConfigError(f"blur radius must be at least 1, got {radius}")
    kernel = _blur_kernel(sigma, radius)
    out = _blur_axis(image, kernel, axis=0)
    out = _blur_axis(out, kernel, axis=1)
    return np.clip(out, 0.0, 1.0)


# --------------------------------------------------------------------------
# JPEG-like compression

# Standard luminance quantization table (row-major), applied to every
# channel; chroma subsampling and entropy coding are omitted because they
# do not change pixel values.
_BASE_QUANT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _dct_matrix(n: int = 8) -> np.ndarray:
    # Orthonormal DCT-II: C[k, i] = s_k * cos((2i+1) k pi / 2n).
    k = np.arange(n).reshape(-1, 1)
    i = np.arange(n).reshape(1, -1)
    mat = np.cos((2 * i + 1) * k * np.pi / (2 * n))
    mat *= np.sqrt(2.0 / n)
    mat[0] *= np.sqrt(0.5)
    return mat


_DCT = _dct_matrix()


def quantization_table(quality: int) -> np.ndarray:
    """Scale the base table by the conventional quality rule, clamp [1, 255]."""
    if not 1 <= quality <= 100:
        raise ConfigError(f"jpeg quality must be in [1, 100], got {quality}")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor((_BASE_QUANT * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def _blocks(channel: np.ndarray) -> tuple[np.ndarray, int, int]:
    h, w = channel.shape
    ph, pw = (-h) % 8, (-w) % 8
    padded = np.pad(channel, ((0, ph), (0, pw)), mode="edge")
    hb, wb = padded.shape[0] // 8, padded.shape[1] // 8
    blocks = padded.reshape(hb, 8, wb, 8).transpose(0, 2, 1, 3)
    return blocks, h, w


def _unblocks(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    hb, wb = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(hb * 8, wb * 8)[:h, :w]


def dct2_block(block: np.ndarray) -> np.ndarray:
    return _DCT @ block @ _DCT.T


def idct2_block(coeffs: np.ndarray) -> np.ndarray:
    return _DCT.T @ coeffs @ _DCT


def jpeg_like(image, quality: int) -> np.ndarray:
    """8x8 DCT quantization round trip per channel at the given quality.

    Pixels are level-shifted by -0.5; quantization table entries are
    defined on the 0..255 domain, so they divide by a further 255 here.
    Edge blocks are replication-padded and cropped back.
    """
    image = _as_image(image)
    table = quantization_table(quality) / 255.0
    out = np.empty_like(image)
    for c in range(image.shape[2]):
        blocks, h, w = _blocks(image[:, :, c] - 0.5)
        coeffs = np.einsum("ki,bcij,lj->bckl", _DCT, blocks, _DCT)
        coeffs = np.round(coeffs / table) * table
        recon = np.einsum("ki,bckl,lj->bcij", _DCT, coeffs, _DCT)
        out[:, :, c] = _unblocks(recon, h, w) + 0.5
    return np.clip(out, 0.0, 1.0)


def adjust_contrast(image, factor: float) -> np.ndarray:
    """Scale deviations from mid-gray by ``factor``, then clip."""
    image = _as_image(image)
    if factor < 0:
        raise ConfigError(f"contrast factor must be nonnegative, got {factor}")
    return np.clip((image - 0.5) * factor + 0.5, 0.0, 1.0)


def adjust_brightness(image, offset: float) -> np.ndarray:
    """Shift every intensity by ``offset``, then clip."""
    image = _as_image(image)
    return np.clip(image + offset, 0.0, 1.0)


# --------------------------------------------------------------------------
# Declarative specs, used by the experiment grid and the CLI


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    std: float = 0.0          # noise
    sigma: float = 1.0        # blur
    radius: int = 3           # blur
    quality: int = 60         # jpeg
    factor: float = 1.0       # contrast
    offset: float = 0.0       # brightness

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ConfigError(
                f"unknown transform kind '{self.kind}' (want one of {TRANSFORM_KINDS})"
            )
        if self.kind == "noise" and self.std < 0:
            raise ConfigError(f"noise std must be nonnegative, got {self.std}")
        if self.kind == "blur" and (self.sigma <= 0 or self.radius < 1):
            raise ConfigError(f"invalid blur parameters {self}")
        if self.kind == "jpeg" and not (
            isinstance(self.quality, int) and 1 <= self.quality <= 100
        ):
            raise ConfigError(f"jpeg quality must be an integer in [1, 100], got {self.quality}")
        if self.kind == "contrast" and self.factor < 0:
            raise ConfigError(f"contrast factor must be nonnegative, got {self.factor}")

    @property
    def parameter(self) -> str:
        """The one number that names this cell in reports."""
        if self.kind == "noise":
            return repr(self.std)
        if self.kind == "blur":
            return f"{self.sigma!r},{self.radius}"
        if self.kind == "jpeg":
            return str(self.quality)
        if self.kind == "contrast":
            return repr(self.factor)
        if self.kind == "brightness":
            return repr(self.offset)
        return ""

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.parameter}" if self.parameter else self.kind

    def randomized(self) -> bool:
        return self.kind == "noise" and self.std > 0

    def apply(self, image, seed: int = 0) -> np.ndarray:
        if self.kind == "identity":
            return _as_image(image).copy()
        if self.kind == "noise":
            return add_gaussian_noise(image, self.std, seed)
        if self.kind == "blur":
            return gaussian_blur(image, self.sigma, self.radius)
        if self.kind == "jpeg":
            return jpeg_like(image, self.quality)
        if self.kind == "contrast":
            return adjust_contrast(image, self.factor)
        return adjust_brightness(image, self.offset)


def parse_transform(text: str) -> TransformSpec:
    """Parse one grid entry: 'kind' or 'kind:params'.

    noise:STD | blur:SIGMA[,RADIUS] | jpeg:QUALITY | contrast:FACTOR |
    brightness:OFFSET | identity
    """
    text = text.strip()
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    arg = arg.strip()
    if kind not in TRANSFORM_KINDS:
        raise ConfigError(f"unknown transform '{text}'")
    try:
        if kind == "identity":
            if arg:
                raise ConfigError(f"identity takes no parameter, got '{text}'")
            return TransformSpec("identity")
        if not arg:
            raise ConfigError(f"transform '{kind}' needs a parameter, got '{text}'")
        if kind == "noise":
            return TransformSpec("noise", std=float(arg))
        if kind == "blur":
            sigma, _, radius = arg.partition(",")
            return TransformSpec(
                "blur", sigma=float(sigma), radius=int(radius) if radius else 3
            )
        if kind == "jpeg":
            return TransformSpec("jpeg", quality=int(arg))
        if kind == "contrast":
            return TransformSpec("contrast", factor=float(arg))
        return TransformSpec("brightness", offset=float(arg))
    except ValueError as err:
        raise ConfigError(f"bad transform parameter in '{text}': {err}") from None


def parse_grid(text: str) -> list[TransformSpec]:
    """Parse a semicolon-separated transform grid, e.g. 'noise:0.1;jpeg:60'."""
    entries = [piece for piece in text.split(";") if piece.strip()]
    return [parse_transform(piece) for piece in entries]
