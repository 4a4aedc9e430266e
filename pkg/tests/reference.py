"""Independent reference implementations used as test oracles.

Everything here is written as plain scalar loops, deliberately sharing no
code with the package, so agreement is meaningful evidence rather than a
tautology.
"""

import math

import numpy as np


def conv_forward(image, weights, biases):
    """Valid convolution, stride 1. weights: (kh, kw, in_c, out_c)."""
    h, w, c = image.shape
    kh, kw, _, filters = weights.shape
    out = np.zeros((h - kh + 1, w - kw + 1, filters))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            for f in range(filters):
                acc = biases[f]
                for di in range(kh):
                    for dj in range(kw):
                        for ch in range(c):
                            acc += image[i + di, j + dj, ch] * weights[di, dj, ch, f]
                out[i, j, f] = acc
    return out


def maxpool_forward(image, size):
    h, w, c = image.shape
    out = np.zeros((h // size, w // size, c))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            for ch in range(c):
                best = -math.inf
                for di in range(size):
                    for dj in range(size):
                        best = max(best, image[i * size + di, j * size + dj, ch])
                out[i, j, ch] = best
    return out


def dense_forward(image, weights, biases):
    flat = np.asarray(image).reshape(-1)
    out = np.zeros(weights.shape[1])
    for k in range(weights.shape[1]):
        acc = biases[k]
        for i in range(len(flat)):
            acc += flat[i] * weights[i, k]
        out[k] = acc
    return out


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    top = logits.max()
    exps = np.array([math.exp(v - top) for v in logits])
    return exps / exps.sum()


def forward(net, image):
    """Scalar-loop forward pass through an advcraft Network's layers."""
    out = np.asarray(image, dtype=np.float64)
    for spec, params in zip(net.layers, net.params):
        kind = spec.kind
        if kind == "conv":
            out = conv_forward(out, params[0], params[1])
        elif kind == "max-pool":
            out = maxpool_forward(out, spec.size)
        elif kind == "dense":
            out = dense_forward(out, params[0], params[1])
        elif kind == "relu":
            out = np.maximum(out, 0.0)
        elif kind == "softmax":
            out = softmax(out)
        else:
            raise AssertionError(f"unknown layer kind {kind}")
    return out


def fd_input_gradient(f, image, h=1e-5):
    """Central finite differences of scalar f(image) w.r.t. every element."""
    image = np.asarray(image, dtype=np.float64).copy()
    grad = np.zeros_like(image)
    flat = image.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(image)
        flat[i] = old - h
        down = f(image)
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def window_sd(image, n):
    """Population SD over the clipped n-by-n window around each element."""
    image = np.asarray(image, dtype=np.float64)
    h, w, c = image.shape
    r = n // 2
    out = np.zeros_like(image)
    for i in range(h):
        for j in range(w):
            for ch in range(c):
                vals = []
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        y, x = i + di, j + dj
                        if 0 <= y < h and 0 <= x < w:
                            vals.append(image[y, x, ch])
                mean = sum(vals) / len(vals)
                var = sum((v - mean) ** 2 for v in vals) / len(vals)
                out[i, j, ch] = math.sqrt(var)
    return out


def perceptual_distance(original, candidate, sen_values):
    total = 0.0
    o = np.asarray(original).ravel()
    cand = np.asarray(candidate).ravel()
    s = np.asarray(sen_values).ravel()
    for i in range(o.size):
        total += abs(cand[i] - o[i]) * s[i]
    return total


def smoothed_max(values, k):
    return math.log(sum(math.exp(k * v) for v in values)) / k


def wilson(successes, trials, z=1.959963984540054):
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)
