"""Targeted attacks: greedy probability-gap maximization plus baselines.

The primary attack maximizes the gap between the target-class probability
and the largest remaining probability, smoothed with log-sum-exp so it is
differentiable, while charging every pixel move against the perceptual
distance budget.  Pixels are chosen greedily by gradient-per-sensitivity
("perturbation priority").  Iterative FGSM and a single-pixel saliency
attack are included as comparison baselines; both measure their budget
with the same perceptual distance so comparisons are like for like.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, StalledAttackError
from .nn import Network, forward_batch_cached, input_gradient_cached
from .perception import SensitivityMap, perceptual_distance, sensitivity_map

MODE_MINIMAL = "minimal"
MODE_BUDGET = "budget"
_MODE_ALIASES = {
    "minimal": MODE_MINIMAL,
    "minimal-stop": MODE_MINIMAL,
    "budget": MODE_BUDGET,
    "robust-budget": MODE_BUDGET,
}


def normalize_mode(mode: str) -> str:
    if mode not in _MODE_ALIASES:
        raise ConfigError(f"unknown attack mode '{mode}' (want minimal or budget)")
    return _MODE_ALIASES[mode]


@dataclass(frozen=True)
class AttackConfig:
    target: int
    smoothing: float = 100.0       # log-sum-exp sharpness k
    pixels_per_step: int = 20      # m pixels moved per iteration
    step: float = 0.01             # per-pixel move magnitude
    distance_budget: float = 70.0  # max perceptual distance D
    mode: str = MODE_MINIMAL
    max_iters: int = 5000

    def __post_init__(self):
        if (
            self.smoothing <= 0
            or self.pixels_per_step < 1
            or self.step <= 0
            or self.distance_budget < 0
            or self.max_iters < 1
        ):
            raise ConfigError(f"invalid attack configuration {self}")
        object.__setattr__(self, "mode", normalize_mode(self.mode))


@dataclass(frozen=True)
class TracePoint:
    distance: float
    gap: float
    predicted: int


@dataclass
class AttackResult:
    image: np.ndarray
    success: bool
    predicted: int
    gap: float
    distance: float
    iterations: int
    trace: list[TracePoint] = field(default_factory=list)


def write_trace_csv(trace, path_or_handle):
    """Trace rows as RFC-4180 CSV: iteration, distance, gap, predicted."""
    def _write(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["iteration", "distance", "gap", "predicted"])
        for i, point in enumerate(trace):
            writer.writerow([i, repr(point.distance), repr(point.gap), point.predicted])

    if hasattr(path_or_handle, "write"):
        _write(path_or_handle)
    else:
        with open(path_or_handle, "w", newline="") as handle:
            _write(handle)


# --------------------------------------------------------------------------
# Objective pieces


def gap(probs, target: int) -> float:
    """Target probability minus the largest non-target probability."""
    probs = np.asarray(probs, dtype=np.float64)
    if len(probs) < 2:
        raise ConfigError("gap needs at least two classes")
    if not 0 <= target < len(probs):
        raise ConfigError(f"target {target} out of range for {len(probs)} classes")
    others = np.delete(probs, target)
    return float(probs[target] - others.max())


def smoothed_max(values, k: float) -> float:
    """log-sum-exp upper approximation of max with sharpness ``k``."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ConfigError("smoothed_max of an empty collection")
    if k <= 0:
        raise ConfigError(f"smoothing constant must be positive, got {k}")
    top = values.max()
    return float(top + np.log(np.exp(k * (values - top)).sum()) / k)


def smoothed_gap(probs, target: int, k: float) -> float:
    """Differentiable gap: P_target minus the smoothed max of the rest."""
    probs = np.asarray(probs, dtype=np.float64)
    if len(probs) < 2:
        raise ConfigError("smoothed_gap needs at least two classes")
    if not 0 <= target < len(probs):
        raise ConfigError(f"target {target} out of range for {len(probs)} classes")
    return float(probs[target] - smoothed_max(np.delete(probs, target), k))


def gap_output_seed(probs, target: int, k: float) -> np.ndarray:
    """Gradient of the smoothed gap w.r.t. the probability vector.

    1 at the target entry; each non-target entry gets minus its softmax
    weight (temperature k) among the non-target probabilities, so the
    non-target magnitudes sum to exactly 1.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= target < len(probs):
        raise ConfigError(f"target {target} out of range for {len(probs)} classes")
    seed = np.zeros(len(probs))
    seed[target] = 1.0
    others = np.delete(probs, target)
    z = k * (others - others.max())
    weights = np.exp(z)
    weights /= weights.sum()
    seed[np.arange(len(probs)) != target] = -weights
    return seed


def perturb_priority(gap_gradient, sen: SensitivityMap) -> np.ndarray:
    """|gap gradient| / sensitivity; the move direction is the gradient sign."""
    gap_gradient = np.asarray(gap_gradient, dtype=np.float64)
    if gap_gradient.shape != sen.values.shape:
        raise ConfigError(
            f"gradient shape {gap_gradient.shape} != sensitivity shape {sen.values.shape}"
        )
    return np.abs(gap_gradient) / sen.values


# --------------------------------------------------------------------------
# Shared helpers


def _probs_cached(net, image):
    probs, caches = forward_batch_cached(net, image[None])
    return probs[0], caches


class _BestIterate:
    """Tracks the best smoothed gap among target-classified iterates."""

    def __init__(self):
        self.sgap = -np.inf
        self.snapshot = None

    def offer(self, sgap, image, probs, distance, iterations):
        if self.snapshot is None or sgap > self.sgap:
            self.sgap = sgap
            self.snapshot = (image.copy(), probs.copy(), distance, iterations)


def _finish(target, mode, best, x, probs, distance, iterations, trace):
    if mode == MODE_BUDGET and best.snapshot is not None:
        image, probs, distance, iterations = best.snapshot
        return AttackResult(
            image=image,
            success=True,
            predicted=target,
            gap=gap(probs, target),
            distance=distance,
            iterations=iterations,
            trace=trace,
        )
    predicted = int(np.argmax(probs))
    return AttackResult(
        image=x.copy(),
        success=predicted == target,
        predicted=predicted,
        gap=gap(probs, target),
        distance=distance,
        iterations=iterations,
        trace=trace,
    )


# --------------------------------------------------------------------------
# Greedy gap-maximizing attack


def greedy_attack(
    net: Network, image, cfg: AttackConfig, sen: SensitivityMap | None = None
) -> AttackResult:
    """Greedy crafting loop.

    Each iteration ranks pixels by perturbation priority, moves the top m
    eligible pixels by the step magnitude along their gradient sign
    (clipped to [0, 1]) and recomputes the perceptual distance.  The
    budget is tested before perturbing, so the final distance can
    overshoot it by at most one iteration's worth.

    A pixel is eligible when its priority is positive and the move would
    strictly grow its net displacement from the original (this covers
    pixels saturated in their move direction).  Sensitivity is computed
    once from the original image and stays frozen.
    """
    x = np.asarray(image, dtype=np.float64).copy()
    if x.shape != net.input_shape:
        raise ConfigError(f"image shape {x.shape} != network input {net.input_shape}")
    original = x.copy()
    if sen is None:
        sen = sensitivity_map(original)
    target, k, mode = cfg.target, cfg.smoothing, cfg.mode

    probs, caches = _probs_cached(net, x)
    predicted = int(np.argmax(probs))
    distance = 0.0
    trace = [TracePoint(0.0, gap(probs, target), predicted)]
    best = _BestIterate()
    if predicted == target:
        if mode == MODE_MINIMAL:
            return _finish(target, mode, best, x, probs, distance, 0, trace)
        best.offer(smoothed_gap(probs, target, k), x, probs, distance, 0)

    iterations = 0
    while distance < cfg.distance_budget and iterations < cfg.max_iters:
        seed = gap_output_seed(probs, target, k)
        grad = input_gradient_cached(net, caches, seed)[0]
        priority = perturb_priority(grad, sen)
        moved = np.clip(x + cfg.step * np.sign(grad), 0.0, 1.0)
        eligible = (priority > 0.0) & (
            np.abs(moved - original) > np.abs(x - original)
        )
        if not eligible.any():
            raise StalledAttackError(
                f"greedy attack stalled after {iterations} iterations: "
                "no eligible pixel",
                trace=trace,
                iterations=iterations,
            )
        # Stable argsort on -priority: equal priorities resolve to the
        # lower flat index, making the whole attack deterministic.
        order = np.argsort(-priority.ravel(), kind="stable")
        chosen = order[eligible.ravel()[order]][: cfg.pixels_per_step]
        x.ravel()[chosen] = moved.ravel()[chosen]

        distance = perceptual_distance(original, x, sen)
        probs, caches = _probs_cached(net, x)
        predicted = int(np.argmax(probs))
        iterations += 1
        trace.append(TracePoint(distance, gap(probs, target), predicted))
        if predicted == target:
            if mode == MODE_MINIMAL:
                return _finish(target, mode, best, x, probs, distance, iterations, trace)
            best.offer(smoothed_gap(probs, target, k), x, probs, distance, iterations)

    return _finish(target, mode, best, x, probs, distance, iterations, trace)


# --------------------------------------------------------------------------
# Baselines


def fgsm_attack(
    net: Network,
    image,
    target: int,
    alpha: float = 0.001,
    max_iters: int = 1000,
    distance_budget: float = 70.0,
    sen: SensitivityMap | None = None,
    mode: str = MODE_MINIMAL,
    smoothing: float = 100.0,
) -> AttackResult:
    """Iterative targeted FGSM under the perceptual-distance budget.

    Every pixel moves by alpha against the sign of the target
    cross-entropy gradient each iteration.  A step whose resulting
    distance would exceed the budget is not applied.
    """
    mode = normalize_mode(mode)
    x = np.asarray(image, dtype=np.float64).copy()
    if x.shape != net.input_shape:
        raise ConfigError(f"image shape {x.shape} != network input {net.input_shape}")
    original = x.copy()
    if sen is None:
        sen = sensitivity_map(original)

    probs, caches = _probs_cached(net, x)
    predicted = int(np.argmax(probs))
    distance = 0.0
    trace = [TracePoint(0.0, gap(probs, target), predicted)]
    best = _BestIterate()
    if predicted == target:
        if mode == MODE_MINIMAL:
            return _finish(target, mode, best, x, probs, distance, 0, trace)
        best.offer(smoothed_gap(probs, target, smoothing), x, probs, distance, 0)
    if alpha == 0.0:
        return _finish(target, mode, best, x, probs, distance, 0, trace)

    iterations = 0
    while iterations < max_iters:
        # d(cross entropy)/dP is a one-hot seed scaled by -1/P_target.
        seed = np.zeros(net.class_count)
        seed[target] = -1.0 / (probs[target] + 1e-12)
        grad = input_gradient_cached(net, caches, seed)[0]
        direction = -np.sign(grad)
        if not direction.any():
            raise StalledAttackError(
                f"fgsm stalled after {iterations} iterations: zero gradient",
                trace=trace,
                iterations=iterations,
            )
        candidate = np.clip(x + alpha * direction, 0.0, 1.0)
        if np.array_equal(candidate, x):
            raise StalledAttackError(
                f"fgsm stalled after {iterations} iterations: "
                "every pixel saturated in its step direction",
                trace=trace,
                iterations=iterations,
            )
        candidate_distance = perceptual_distance(original, candidate, sen)
        if candidate_distance > distance_budget:
            break
        x, distance = candidate, candidate_distance
        probs, caches = _probs_cached(net, x)
        predicted = int(np.argmax(probs))
        iterations += 1
        trace.append(TracePoint(distance, gap(probs, target), predicted))
        if predicted == target:
            if mode == MODE_MINIMAL:
                return _finish(target, mode, best, x, probs, distance, iterations, trace)
            best.offer(smoothed_gap(probs, target, smoothing), x, probs, distance, iterations)

    return _finish(target, mode, best, x, probs, distance, iterations, trace)


def jsma_attack(
    net: Network,
    image,
    target: int,
    theta: float = 1.0,
    distance_budget: float = 70.0,
    sen: SensitivityMap | None = None,
    mode: str = MODE_MINIMAL,
    max_iters: int = 2000,
    smoothing: float = 100.0,
) -> AttackResult:
    """Single-pixel saliency baseline.

    Each iteration pushes the unsaturated pixel with the largest positive
    target-probability gradient toward 1 by theta.  Budget handling
    matches the FGSM baseline.
    """
    mode = normalize_mode(mode)
    if not 0.0 < theta <= 1.0:
        raise ConfigError(f"theta must lie in (0, 1], got {theta}")
    x = np.asarray(image, dtype=np.float64).copy()
    if x.shape != net.input_shape:
        raise ConfigError(f"image shape {x.shape} != network input {net.input_shape}")
    original = x.copy()
    if sen is None:
        sen = sensitivity_map(original)

    probs, caches = _probs_cached(net, x)
    predicted = int(np.argmax(probs))
    distance = 0.0
    trace = [TracePoint(0.0, gap(probs, target), predicted)]
    best = _BestIterate()
    if predicted == target:
        if mode == MODE_MINIMAL:
            return _finish(target, mode, best, x, probs, distance, 0, trace)
        best.offer(smoothed_gap(probs, target, smoothing), x, probs, distance, 0)

    one_hot = np.zeros(net.class_count)
    one_hot[target] = 1.0
    iterations = 0
    while iterations < max_iters:
        grad = input_gradient_cached(net, caches, one_hot)[0]
        usable = (grad > 0.0) & (x < 1.0)
        if not usable.any():
            raise StalledAttackError(
                f"jsma stalled after {iterations} iterations: "
                "no unsaturated pixel with positive target gradient",
                trace=trace,
                iterations=iterations,
            )
        flat = np.where(usable.ravel(), grad.ravel(), -np.inf)
        pick = int(np.argmax(flat))  # ties fall to the lower flat index
        candidate = x.copy()
        candidate.ravel()[pick] = min(1.0, candidate.ravel()[pick] + theta)
        candidate_distance = perceptual_distance(original, candidate, sen)
        if candidate_distance > distance_budget:
            break
        x, distance = candidate, candidate_distance
        probs, caches = _probs_cached(net, x)
        predicted = int(np.argmax(probs))
        iterations += 1
        trace.append(TracePoint(distance, gap(probs, target), predicted))
        if predicted == target:
            if mode == MODE_MINIMAL:
                return _finish(target, mode, best, x, probs, distance, iterations, trace)
            best.offer(smoothed_gap(probs, target, smoothing), x, probs, distance, iterations)

    return _finish(target, mode, best, x, probs, distance, iterations, trace)


ATTACKS = {
    "greedy": greedy_attack,
    "fgsm": fgsm_attack,
    "jsma": jsma_attack,
}
