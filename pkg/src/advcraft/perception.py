"""Perceptual sensitivity and distance.

Human eyes notice a perturbation far more readily in flat image regions
than in busy ones, so each pixel's sensitivity is the reciprocal of the
local standard deviation in an n-by-n window around it, and the distance
between an image and its perturbed counterpart is the sensitivity-weighted
sum of per-pixel displacement magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_WINDOW = 3
# Uniform regions have zero local deviation; the floor keeps sensitivity
# finite (capped at 1/floor) while leaving those regions maximally protected.
DEFAULT_SD_FLOOR = 1e-2


@dataclass(frozen=True)
class SensitivityMap:
    """Per-element perturbation sensitivity, frozen for one source image."""

    values: np.ndarray
    window: int
    sd_floor: float

    @property
    def shape(self):
        return self.values.shape


def _span(extent, offset):
    """Destination/source slices for a shift by ``offset`` along one axis."""
    lo = max(0, -offset)
    hi = min(extent, extent - offset)
    return slice(lo, hi), slice(lo + offset, hi + offset)


def sd_map(image, n: int = DEFAULT_WINDOW) -> np.ndarray:
    """Windowed population standard deviation, per channel.

    Windows are clipped at the image boundary and the divisor is the actual
    number of in-window elements (n*n in the interior).
    """
    if n % 2 == 0 or n < 3:
        raise ConfigError(f"window size must be odd and >= 3, got {n}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ConfigError(f"image must be rank 3, got shape {image.shape}")
    h, w, _ = image.shape
    reach = n // 2

    total = np.zeros_like(image)
    count = np.zeros((h, w, 1))
    offsets = [(di, dj) for di in range(-reach, reach + 1) for dj in range(-reach, reach + 1)]
    for di, dj in offsets:
        di_dst, di_src = _span(h, di)
        dj_dst, dj_src = _span(w, dj)
        total[di_dst, dj_dst] += image[di_src, dj_src]
        count[di_dst, dj_dst] += 1.0
    mean = total / count

    # Second pass against the window mean; structurally identical to the
    # scalar definition, so no catastrophic cancellation on flat regions.
    sq = np.zeros_like(image)
    for di, dj in offsets:
        di_dst, di_src = _span(h, di)
        dj_dst, dj_src = _span(w, dj)
        sq[di_dst, dj_dst] += (image[di_src, dj_src] - mean[di_dst, dj_dst]) ** 2
    return np.sqrt(sq / count)


def sensitivity_map(
    image, n: int = DEFAULT_WINDOW, sd_floor: float = DEFAULT_SD_FLOOR
) -> SensitivityMap:
    """Sensitivity = 1 / max(SD, floor), elementwise."""
    if sd_floor <= 0:
        raise ConfigError(f"sd_floor must be positive, got {sd_floor}")
    sd = sd_map(image, n)
    return SensitivityMap(1.0 / np.maximum(sd, sd_floor), n, sd_floor)


def perceptual_distance(original, candidate, sen: SensitivityMap) -> float:
    """Sensitivity-weighted sum of absolute per-element displacements."""
    original = np.asarray(original, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    if original.shape != candidate.shape or original.shape != sen.values.shape:
        raise ConfigError(
            f"shape mismatch: original {original.shape}, candidate {candidate.shape}, "
            f"sensitivity {sen.values.shape}"
        )
    return float(np.sum(np.abs(candidate - original) * sen.values))
