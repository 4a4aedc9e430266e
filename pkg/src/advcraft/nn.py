"""Minimal float64 neural-network engine.

Supports exactly the layer kinds needed by the classifiers under attack:
valid convolution (stride 1), max pooling (stride = window), dense, ReLU
and a single final softmax.  Forward passes return class probabilities;
the backward pass yields the exact gradient of any linear functional of
those probabilities with respect to the input image, which is what the
attacks consume.

Conventions: images are rank-3 ``(height, width, channels)`` arrays, all
arithmetic is 64-bit, and batched internals carry a leading batch axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError

Array = np.ndarray


# --------------------------------------------------------------------------
# Layer specifications


@dataclass(frozen=True)
class Conv:
    """Valid 2-D convolution, stride 1, no padding."""

    height: int
    width: int
    filters: int

    kind = "conv"


@dataclass(frozen=True)
class MaxPool:
    """Square max pooling with stride equal to the window size."""

    size: int

    kind = "max-pool"


@dataclass(frozen=True)
class Dense:
    """Fully connected layer; flattens its input."""

    units: int

    kind = "dense"


@dataclass(frozen=True)
class Relu:
    kind = "relu"


@dataclass(frozen=True)
class Softmax:
    """Final probability layer; flattens its input if necessary."""

    kind = "softmax"


LayerSpec = Conv | MaxPool | Dense | Relu | Softmax


def output_shape(spec: LayerSpec, shape: tuple) -> tuple:
    """Shape produced by ``spec`` on an input of ``shape`` (no batch axis)."""
    if isinstance(spec, Conv):
        if len(shape) != 3:
            raise ConfigError(f"conv expects a rank-3 input, got shape {shape}")
        h, w, _ = shape
        if not (1 <= spec.height <= h and 1 <= spec.width <= w):
            raise ConfigError(
                f"conv kernel {spec.height}x{spec.width} does not fit input {h}x{w}"
            )
        if spec.filters < 1:
            raise ConfigError("conv needs at least one filter")
        return (h - spec.height + 1, w - spec.width + 1, spec.filters)
    if isinstance(spec, MaxPool):
        if len(shape) != 3:
            raise ConfigError(f"max-pool expects a rank-3 input, got shape {shape}")
        h, w, c = shape
        if spec.size < 1 or spec.size > min(h, w):
            raise ConfigError(f"pool window {spec.size} does not fit input {h}x{w}")
        return (h // spec.size, w // spec.size, c)
    if isinstance(spec, Dense):
        if spec.units < 1:
            raise ConfigError("dense needs at least one unit")
        return (spec.units,)
    if isinstance(spec, (Relu, Softmax)):
        if isinstance(spec, Softmax):
            return (int(np.prod(shape)),)
        return shape
    raise ConfigError(f"unknown layer spec {spec!r}")


def _fan_in(spec: LayerSpec, shape: tuple) -> int:
    if isinstance(spec, Conv):
        return spec.height * spec.width * shape[2]
    if isinstance(spec, Dense):
        return int(np.prod(shape))
    raise ConfigError(f"{spec.kind} has no coefficients")


# --------------------------------------------------------------------------
# Network


class Network:
    """Immutable-after-construction classifier: specs plus coefficients.

    ``params[i]`` is ``(weights, biases)`` for coefficient-bearing layers
    and ``None`` otherwise.
    """

    def __init__(self, input_shape, layers, params):
        self.input_shape = tuple(int(n) for n in input_shape)
        self.layers = list(layers)
        self.params = list(params)
        self.shapes = self._validate()
        self.class_count = int(np.prod(self.shapes[-1]))

    def _validate(self):
        if len(self.input_shape) != 3 or any(n < 1 for n in self.input_shape):
            raise ConfigError(f"input shape must be rank 3, got {self.input_shape}")
        if len(self.layers) != len(self.params):
            raise ConfigError("one params entry per layer required")
        softmax_positions = [
            i for i, s in enumerate(self.layers) if isinstance(s, Softmax)
        ]
        if softmax_positions != [len(self.layers) - 1]:
            raise ConfigError("softmax must appear exactly once, as the final layer")
        shapes = [self.input_shape]
        for i, (spec, p) in enumerate(zip(self.layers, self.params)):
            shape = output_shape(spec, shapes[-1])
            if isinstance(spec, (Conv, Dense)):
                w, b = p
                expect_w = (
                    (spec.height, spec.width, shapes[-1][2], spec.filters)
                    if isinstance(spec, Conv)
                    else (int(np.prod(shapes[-1])), spec.units)
                )
                if w.shape != expect_w or b.shape != shape[-1:]:
                    raise ConfigError(
                        f"layer {i} ({spec.kind}): coefficient shape {w.shape}/{b.shape} "
                        f"does not match expected {expect_w}"
                    )
                if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                    raise NumericError(f"layer {i} holds non-finite coefficients", layer=i)
            elif p is not None:
                raise ConfigError(f"layer {i} ({spec.kind}) takes no coefficients")
            shapes.append(shape)
        return shapes

    def copy_params(self):
        return [
            None if p is None else (p[0].copy(), p[1].copy()) for p in self.params
        ]


def init_network(input_shape, layers, seed=0) -> Network:
    """Coefficients drawn uniformly, scaled by 1/sqrt(fan-in), one seeded stream.

    The bound is sqrt(6)/sqrt(fan-in): a plain +-1/sqrt(fan-in) uniform
    attenuates activations roughly 0.41x per conv+relu stage, which flattens
    the softmax so badly that short training runs never leave the plateau.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = []
    shape = tuple(input_shape)
    for spec in layers:
        if isinstance(spec, (Conv, Dense)):
            bound = math.sqrt(6.0) / math.sqrt(_fan_in(spec, shape))
            if isinstance(spec, Conv):
                w = rng.uniform(-bound, bound, (spec.height, spec.width, shape[2], spec.filters))
            else:
                w = rng.uniform(-bound, bound, (int(np.prod(shape)), spec.units))
            b = np.zeros(spec.filters if isinstance(spec, Conv) else spec.units)
            params.append((w, b))
        else:
            params.append(None)
        shape = output_shape(spec, shape)
    return Network(input_shape, layers, params)


# --------------------------------------------------------------------------
# Architectures from the evaluated model family.  The full-size variants
# mirror the published tables; the "small" variants halve every channel
# count so the whole pipeline runs on a desk machine.


def architecture(name: str):
    """Return ``(input_shape, layer_specs)`` for a named preset."""
    presets = {
        "mnist": ((28, 28, 1), (32, 32, 64, 64, 128)),
        "mnist-small": ((28, 28, 1), (16, 16, 32, 32, 64)),
        "cifar10": ((32, 32, 3), (64, 64, 128, 128, 512)),
        "cifar10-small": ((32, 32, 3), (32, 32, 64, 64, 256)),
    }
    if name not in presets:
        raise ConfigError(f"unknown architecture '{name}' (have {sorted(presets)})")
    input_shape, (c1, c2, c3, c4, fc) = presets[name]
    layers = [
        Conv(3, 3, c1), Relu(),
        Conv(3, 3, c2), Relu(),
        MaxPool(2),
        Conv(3, 3, c3), Relu(),
        Conv(3, 3, c4), Relu(),
        MaxPool(2),
        Dense(fc), Relu(),
        Dense(10),
        Softmax(),
    ]
    return input_shape, layers


# --------------------------------------------------------------------------
# Forward pass


def _im2col(x, kh, kw):
    b, h, w, c = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    cols = np.empty((b, oh, ow, kh, kw, c))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = x[:, i : i + oh, j : j + ow, :]
    return cols.reshape(b * oh * ow, kh * kw * c)


def _layer_forward(spec, param, x):
    if isinstance(spec, Conv):
        b, h, w, c = x.shape
        kh, kw = spec.height, spec.width
        oh, ow = h - kh + 1, w - kw + 1
        weights, bias = param
        cols = _im2col(x, kh, kw)
        y = cols @ weights.reshape(kh * kw * c, spec.filters) + bias
        return y.reshape(b, oh, ow, spec.filters), (x.shape, cols)
    if isinstance(spec, MaxPool):
        b, h, w, c = x.shape
        s = spec.size
        oh, ow = h // s, w // s
        # Window elements laid out in scan order so argmax (first maximum)
        # realises the deterministic tie-break.
        windows = (
            x[:, : oh * s, : ow * s, :]
            .reshape(b, oh, s, ow, s, c)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(b, oh, ow, s * s, c)
        )
        best = np.argmax(windows, axis=3)
        y = np.take_along_axis(windows, best[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        return y, (x.shape, best)
    if isinstance(spec, Dense):
        weights, bias = param
        flat = x.reshape(x.shape[0], -1)
        return flat @ weights + bias, (x.shape, flat)
    if isinstance(spec, Relu):
        return np.maximum(x, 0.0), (x > 0.0,)
    if isinstance(spec, Softmax):
        flat = x.reshape(x.shape[0], -1)
        # Max-logit subtraction keeps exp() in range.
        z = flat - flat.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        return p, (x.shape, p)
    raise ConfigError(f"unknown layer spec {spec!r}")


def forward_batch_cached(net: Network, images: Array):
    """Probabilities plus per-layer caches for a ``(B, H, W, C)`` batch."""
    if images.ndim != 4 or images.shape[1:] != net.input_shape:
        raise ConfigError(
            f"batch shape {images.shape[1:]} does not match network input {net.input_shape}"
        )
    a = np.asarray(images, dtype=np.float64)
    caches = []
    for i, (spec, param) in enumerate(zip(net.layers, net.params)):
        a, cache = _layer_forward(spec, param, a)
        if not np.all(np.isfinite(a)):
            raise NumericError(
                f"non-finite activation leaving layer {i} ({spec.kind})", layer=i
            )
        caches.append(cache)
    return a, caches


def forward(net: Network, image: Array) -> Array:
    """Softmax class probabilities for one image; argmax is the prediction."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != net.input_shape:
        raise ConfigError(
            f"image shape {image.shape} does not match network input {net.input_shape}"
        )
    probs, _ = forward_batch_cached(net, image[None])
    return probs[0]


def forward_batch(net: Network, images: Array) -> Array:
    probs, _ = forward_batch_cached(net, images)
    return probs


def predict(net: Network, image: Array) -> int:
    """Predicted class; argmax ties resolve to the lowest class index."""
    return int(np.argmax(forward(net, image)))


# --------------------------------------------------------------------------
# Backward pass


def _layer_backward(spec, param, cache, dy):
    """Returns (dx, dw, db); dw/db are None for coefficient-free layers."""
    if isinstance(spec, Conv):
        (b, h, w, c), cols = cache
        kh, kw = spec.height, spec.width
        oh, ow = h - kh + 1, w - kw + 1
        weights, _ = param
        dy2 = dy.reshape(b * oh * ow, spec.filters)
        dw = (cols.T @ dy2).reshape(kh, kw, c, spec.filters)
        db = dy2.sum(axis=0)
        dx = np.zeros((b, h, w, c))
        for i in range(kh):
            for j in range(kw):
                dx[:, i : i + oh, j : j + ow, :] += (dy2 @ weights[i, j].T).reshape(
                    b, oh, ow, c
                )
        return dx, dw, db
    if isinstance(spec, MaxPool):
        (b, h, w, c), best = cache
        s = spec.size
        oh, ow = h // s, w // s
        dwin = np.zeros((b, oh, ow, s * s, c))
        np.put_along_axis(dwin, best[:, :, :, None, :], dy[:, :, :, None, :], axis=3)
        dx = np.zeros((b, h, w, c))
        dx[:, : oh * s, : ow * s, :] = (
            dwin.reshape(b, oh, ow, s, s, c)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(b, oh * s, ow * s, c)
        )
        return dx, None, None
    if isinstance(spec, Dense):
        weights, _ = param
        in_shape, flat = cache
        dw = flat.T @ dy
        db = dy.sum(axis=0)
        return (dy @ weights.T).reshape(in_shape), dw, db
    if isinstance(spec, Relu):
        (mask,) = cache
        return dy * mask, None, None
    raise ConfigError(f"no backward rule for {spec!r}")


def backward_from_logit_grad(net: Network, caches, dz, want_param_grads=False):
    """Backpropagate a gradient w.r.t. the softmax *logits* to the input.

    Returns ``(dx, param_grads)`` where ``param_grads`` is populated only
    when requested (training path).
    """
    param_grads = [None] * len(net.layers) if want_param_grads else None
    in_shape, _ = caches[-1]
    dy = dz.reshape(in_shape)
    for i in range(len(net.layers) - 2, -1, -1):
        spec = net.layers[i]
        dy, dw, db = _layer_backward(spec, net.params[i], caches[i], dy)
        if not np.all(np.isfinite(dy)):
            raise NumericError(
                f"non-finite gradient leaving layer {i} ({spec.kind})", layer=i
            )
        if want_param_grads and dw is not None:
            param_grads[i] = (dw, db)
    return dy, param_grads


def probs_grad_to_logit_grad(probs, dprobs):
    """Softmax Jacobian applied to a gradient w.r.t. probabilities."""
    inner = (dprobs * probs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)


def input_gradient_cached(net: Network, caches, output_seed: Array) -> Array:
    """Gradient of ``sum_j seed_j * P_j`` w.r.t. the cached forward's input."""
    _, probs = caches[-1]
    seed = np.asarray(output_seed, dtype=np.float64)
    if seed.shape != (net.class_count,):
        raise ConfigError(
            f"output seed length {seed.shape} does not match {net.class_count} classes"
        )
    dz = probs_grad_to_logit_grad(probs, np.broadcast_to(seed, probs.shape))
    dx, _ = backward_from_logit_grad(net, caches, dz)
    return dx


def input_gradient(net: Network, image: Array, output_seed: Array) -> Array:
    """Exact gradient of the seeded probability functional for one image."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != net.input_shape:
        raise ConfigError(
            f"image shape {image.shape} does not match network input {net.input_shape}"
        )
    _, caches = forward_batch_cached(net, image[None])
    return input_gradient_cached(net, caches, output_seed)[0]


# --------------------------------------------------------------------------
# Loss

EPS_LOG = 1e-12


def cross_entropy(probs: Array, label: int) -> float:
    if not 0 <= label < len(probs):
        raise ConfigError(f"label {label} out of range for {len(probs)} classes")
    return float(-np.log(probs[label] + EPS_LOG))
