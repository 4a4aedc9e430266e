"""Synthetic digit dataset: glyphs composited over textured noise.

Produces MNIST-shaped (28x28x1) grayscale digit images without any
download step.  Each sample renders a 5x7 digit glyph at a random scale
and offset over an iid uniform-noise background, so images carry texture
everywhere.  Textured regions have high local variance, which keeps the
perceptual cost of small perturbations moderate instead of saturating at
the flat-background ceiling; that makes imperceptibility budgets
meaningful for every attack under comparison.

Generation is deterministic per (seed, index) and quantized to uint8 so
datasets round-trip exactly through IDX files.
"""

from __future__ import annotations

import numpy as np

_GLYPH_ROWS = {
    0: (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    1: ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    2: (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    3: (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    4: ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    5: ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    6: (".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."),
    7: ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    8: (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    9: (".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."),
}

GLYPHS = {
    digit: np.array([[c == "#" for c in row] for row in rows], dtype=np.float64)
    for digit, rows in _GLYPH_ROWS.items()
}

IMAGE_SIZE = 28


def _bilinear_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def render_digit(digit: int, rng: np.random.Generator) -> np.ndarray:
    """One 28x28 float image: scaled, jittered glyph in banded speckle.

    Background pixels draw iid from a dark band and stroke pixels from a
    brighter, overlapping band, mixed through a soft bilinear glyph mask.
    The class signal therefore lives entirely in textured (high local
    variance) regions; no part of the image is flat.  Wide bands keep
    local variance high everywhere, so per-pixel perturbation cost stays
    moderate instead of saturating at the flat-background ceiling, and
    the band overlap leaves the task hard enough that a briefly trained
    model keeps moderate confidence.
    """
    glyph = GLYPHS[digit]
    scale = rng.uniform(2.6, 3.4)
    out_h = int(round(glyph.shape[0] * scale))
    out_w = int(round(glyph.shape[1] * scale))
    mask = _bilinear_resize(glyph, out_h, out_w)

    image = rng.uniform(0.0, 1.0, (IMAGE_SIZE, IMAGE_SIZE))
    stroke = rng.uniform(0.3, 1.0, (IMAGE_SIZE, IMAGE_SIZE))
    max_dy = IMAGE_SIZE - out_h
    max_dx = IMAGE_SIZE - out_w
    dy = int(rng.integers((max_dy - 4) // 2, (max_dy + 6) // 2))
    dx = int(rng.integers((max_dx - 4) // 2, (max_dx + 6) // 2))
    dy = max(0, min(max_dy, dy))
    dx = max(0, min(max_dx, dx))

    region = image[dy : dy + out_h, dx : dx + out_w]
    stroke_region = stroke[dy : dy + out_h, dx : dx + out_w]
    image[dy : dy + out_h, dx : dx + out_w] = region * (1 - mask) + stroke_region * mask
    return np.clip(image, 0.0, 1.0)


def make_dataset(count: int, seed: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Balanced uint8 dataset: images (count, 28, 28), labels (count,).

    Sample i is a pure function of (seed, start + i), so disjoint start
    ranges under one seed give non-overlapping train/test splits.
    """
    images = np.empty((count, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        index = start + i
        digit = index % 10
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        floats = render_digit(digit, rng)
        images[i] = np.floor(floats * 255.0 + 0.5).astype(np.uint8)
        labels[i] = digit
    return images, labels
