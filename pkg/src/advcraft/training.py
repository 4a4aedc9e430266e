"""Plain mini-batch SGD training for the engine in :mod:`advcraft.nn`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .nn import (
    EPS_LOG,
    Network,
    backward_from_logit_grad,
    forward_batch_cached,
)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 0
    label_smoothing: float = 0.0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ConfigError(f"invalid training configuration {self}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"label_smoothing must lie in [0, 1): {self}")


def train(net: Network, images, labels, cfg: TrainConfig, log=None) -> Network:
    """SGD over shuffled mini-batches; deterministic for a fixed seed.

    Returns a new :class:`Network`; the input network is left untouched.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ConfigError("empty training set")
    if images.shape[1:] != net.input_shape:
        raise ConfigError(
            f"training images {images.shape[1:]} do not match input {net.input_shape}"
        )
    if labels.min() < 0 or labels.max() >= net.class_count:
        raise ConfigError(f"labels must lie in [0, {net.class_count})")

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    current = Network(net.input_shape, net.layers, net.copy_params())
    n = len(images)
    # Smoothed target: (1 - s) on the label plus s/C spread over all classes.
    smooth_off = cfg.label_smoothing / net.class_count
    smooth_on = 1.0 - cfg.label_smoothing + smooth_off
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            x, y = images[idx], labels[idx]
            try:
                probs, caches = forward_batch_cached(current, x)
            except NumericError as err:
                raise NumericError(
                    f"training diverged at epoch {epoch}, batch {batch_no}: {err}",
                    layer=err.layer, epoch=epoch, batch=batch_no,
                ) from err
            logp = np.log(probs + EPS_LOG)
            loss = float(
                -(smooth_on - smooth_off) * logp[np.arange(len(y)), y].mean()
                - smooth_off * logp.sum(axis=1).mean()
            )
            if not np.isfinite(loss):
                raise NumericError(
                    f"training loss became non-finite at epoch {epoch}, batch {batch_no}",
                    epoch=epoch, batch=batch_no,
                )
            epoch_loss += loss * len(y)
            # Fused softmax + cross-entropy gradient w.r.t. the logits.
            dz = probs - smooth_off
            dz[np.arange(len(y)), y] -= smooth_on - smooth_off
            dz /= len(y)
            _, grads = backward_from_logit_grad(current, caches, dz, want_param_grads=True)
            for li, g in enumerate(grads):
                if g is None:
                    continue
                w, b = current.params[li]
                w -= cfg.learning_rate * g[0]
                b -= cfg.learning_rate * g[1]
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs}: mean loss {epoch_loss / n:.4f}")
    return Network(current.input_shape, current.layers, current.params)


def accuracy(net: Network, images, labels, batch_size=256) -> float:
    """Fraction of samples whose argmax matches the label."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    hits = 0
    for start in range(0, len(images), batch_size):
        probs, _ = forward_batch_cached(net, images[start : start + batch_size])
        hits += int((probs.argmax(axis=1) == labels[start : start + batch_size]).sum())
    return hits / len(images)
