"""End-to-end acceptance checklist.

Each test exercises one numbered criterion on a freshly trained model and
records a PASS/FAIL line that the terminal summary prints.  The heavy
pieces (dataset synthesis, training, the attack/robustness experiments)
are session fixtures shared by criteria 3 through 6; criterion 8 reruns
the experiments from scratch and compares CSV bytes.
"""

import csv
import io
import time

import numpy as np
import pytest

import reference
from conftest import record_acceptance
from advcraft.attack import (
    MODE_BUDGET,
    MODE_MINIMAL,
    AttackConfig,
    smoothed_max,
)
from advcraft.evaluate import run_experiment, write_report_rows
from advcraft.nn import (
    Conv,
    Dense,
    MaxPool,
    Relu,
    Softmax,
    architecture,
    forward,
    forward_batch,
    init_network,
    input_gradient,
)
from advcraft.perception import (
    DEFAULT_SD_FLOOR,
    perceptual_distance,
    sd_map,
    sensitivity_map,
)
from advcraft.synth import make_dataset
from advcraft.training import TrainConfig, accuracy, train
from advcraft.transforms import (
    TransformSpec,
    dct2_block,
    gaussian_blur,
    idct2_block,
    parse_grid,
)

MASTER_SEED = 0
SAMPLE_COUNT = 100
NOISE_LEVELS = ("0.05", "0.1", "0.15", "0.2", "0.25")
GRID = parse_grid("identity;noise:0.05;noise:0.10;noise:0.15;noise:0.20;noise:0.25;jpeg:60")


# --------------------------------------------------------------------------
# Shared world: synthetic data, trained model, evaluation samples


@pytest.fixture(scope="session")
def world():
    t0 = time.perf_counter()
    train_raw, train_labels = make_dataset(10_000, seed=7)
    test_raw, test_labels = make_dataset(2_000, seed=7, start=10_000)
    train_images = train_raw.astype(np.float64)[..., None] / 255.0
    test_images = test_raw.astype(np.float64)[..., None] / 255.0

    input_shape, layers = architecture("mnist-small")
    cfg = TrainConfig(epochs=5, batch_size=32, learning_rate=0.05, seed=7,
                      label_smoothing=0.3)
    net = train(init_network(input_shape, layers, seed=7),
                train_images, train_labels, cfg)
    held_out = accuracy(net, test_images, test_labels)

    predictions = forward_batch(net, test_images).argmax(axis=1)
    chosen = np.flatnonzero(predictions == test_labels)[:SAMPLE_COUNT]
    return {
        "net": net,
        "images": test_images[chosen],
        "labels": test_labels[chosen],
        "accuracy": held_out,
        "train_seconds": time.perf_counter() - t0,
    }


def run_pipeline(world):
    """All experiment runs behind criteria 3-6, with wall-clock stages."""
    net, images, labels = world["net"], world["images"], world["labels"]
    out = {}

    t0 = time.perf_counter()
    minimal = AttackConfig(target=0, mode=MODE_MINIMAL, distance_budget=70.0)
    out["success"] = run_experiment(
        net, images, labels, "greedy", minimal, [], master_seed=MASTER_SEED
    )
    out["success_seconds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    unlimited = AttackConfig(target=0, mode=MODE_MINIMAL, distance_budget=1e9,
                             max_iters=1500)
    out["first_success"] = {
        "greedy": run_experiment(net, images, labels, "greedy", unlimited, [],
                                 master_seed=MASTER_SEED),
        "fgsm": run_experiment(net, images, labels, "fgsm",
                               AttackConfig(target=0, mode=MODE_MINIMAL,
                                            distance_budget=1e9, max_iters=600),
                               [], master_seed=MASTER_SEED, alpha=0.002),
        "jsma": run_experiment(net, images, labels, "jsma",
                               AttackConfig(target=0, mode=MODE_MINIMAL,
                                            distance_budget=1e9, max_iters=2000),
                               [], master_seed=MASTER_SEED, theta=1.0),
    }
    out["first_success_seconds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    budget = AttackConfig(target=0, mode=MODE_BUDGET, distance_budget=70.0,
                          max_iters=600)
    out["robust"] = {
        method: run_experiment(net, images, labels, method, budget, GRID,
                               master_seed=MASTER_SEED, alpha=0.002, theta=1.0)
        for method in ("greedy", "fgsm", "jsma")
    }
    out["robust_seconds"] = time.perf_counter() - t0

    buffer = io.StringIO()
    write_report_rows([out["robust"][m] for m in ("greedy", "fgsm", "jsma")], buffer)
    out["report_csv"] = buffer.getvalue().encode()
    out["records_csv"] = _records_csv(
        [("success", out["success"])]
        + [(f"first_success_{m}", r) for m, r in out["first_success"].items()]
    )
    return out


def _records_csv(tagged_reports):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["run", "method", "sample", "target", "success",
                     "distance", "gap", "iterations"])
    for tag, report in tagged_reports:
        for r in report.records:
            writer.writerow([tag, report.method, r.sample_id, r.target,
                             int(r.attack_success), repr(r.distance),
                             repr(r.gap), r.iterations])
    return buffer.getvalue().encode()


@pytest.fixture(scope="session")
def experiments(world):
    return run_pipeline(world)


def noise_column(report):
    by_param = {(row.kind, row.parameter): row.r for row in report.rows()}
    return [by_param[("noise", level)] for level in NOISE_LEVELS]


def max_inversions(column):
    """Largest single increase along a column and how many increases."""
    ups = [b - a for a, b in zip(column, column[1:]) if b > a]
    return (len(ups), max(ups) if ups else 0.0)


# --------------------------------------------------------------------------
# 1. gradient correctness


def _small_random_net(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(8, 13))
    layers = [Conv(3, 3, int(rng.integers(2, 7))), Relu()]
    if rng.integers(2):
        layers.append(MaxPool(2))
    if rng.integers(2):
        layers.append(Conv(3, 3, int(rng.integers(2, 5))))
        layers.append(Relu())
    for units in (int(rng.integers(8, 17)), 8):
        try:
            trial = layers + [Dense(units), Relu(),
                              Dense(int(rng.integers(3, 11))), Softmax()]
            net = init_network((size, size, 1), trial, seed=int(rng.integers(1 << 31)))
        except Exception:
            continue
        if _param_count(net) <= 10_000:
            return net, rng
    raise AssertionError(f"could not build a small net for seed {seed}")


def _param_count(net):
    return sum(p[0].size + p[1].size for p in net.params if p is not None)


def test_criterion_1_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        net, rng = _small_random_net(1000 + i)
        image = np.clip(rng.random(net.input_shape)
                        + 1e-3 * rng.standard_normal(net.input_shape), 0, 1)
        seed_vec = rng.standard_normal(net.class_count)
        got = input_gradient(net, image, seed_vec)
        want = reference.fd_input_gradient(
            lambda img: float(forward(net, img) @ seed_vec), image, h=1e-5
        )
        scale = np.maximum(np.abs(want), np.maximum(np.abs(got), 1e-6))
        worst = max(worst, float((np.abs(got - want) / scale).max()))
    elapsed = time.perf_counter() - t0
    passed = worst < 1e-4 and elapsed < 60
    record_acceptance(
        1, "input gradient matches central finite differences on 20 random nets",
        passed, f"max rel err {worst:.2e}, {elapsed:.1f}s",
    )
    assert worst < 1e-4
    assert elapsed < 60


# --------------------------------------------------------------------------
# 2. smoothing fidelity


def test_criterion_2_smoothed_max_reference_values():
    soft = smoothed_max([0.2, 0.1], 1.0)
    sharp = smoothed_max([0.2, 0.1], 100.0)
    soft_ok = abs(soft - 0.84) < 5e-3
    sharp_ok = abs(sharp - 0.2000005) < 1e-6
    record_acceptance(
        2, "smoothed max reproduces its documented two-value examples",
        soft_ok and sharp_ok, f"k=1 -> {soft:.4f}, k=100 -> {sharp:.7f}",
    )
    assert soft_ok
    assert sharp_ok


# --------------------------------------------------------------------------
# 3. attack success rate


def test_criterion_3_greedy_success_rate(world, experiments):
    rate = experiments["success"].success_rate
    elapsed = world["train_seconds"] + experiments["success_seconds"]
    passed = rate >= 0.80 and world["accuracy"] >= 0.90 and elapsed < 600
    record_acceptance(
        3, "greedy attack flips >= 80% of 100 correct test images at budget 70",
        passed,
        f"success {rate:.2f}, model accuracy {world['accuracy']:.4f}, {elapsed:.0f}s",
    )
    assert world["accuracy"] >= 0.90
    assert rate >= 0.80
    assert elapsed < 600


# --------------------------------------------------------------------------
# 4. imperceptibility ordering


def test_criterion_4_greedy_needs_least_distance(experiments):
    means = {
        method: report.mean_distance
        for method, report in experiments["first_success"].items()
    }
    passed = (
        means["greedy"] is not None
        and means["fgsm"] is not None
        and means["jsma"] is not None
        and means["greedy"] < means["fgsm"]
        and means["greedy"] < means["jsma"]
    )
    detail = ", ".join(
        f"{m} {v:.1f}" if v is not None else f"{m} NA" for m, v in means.items()
    )
    record_acceptance(
        4, "mean first-success distance: greedy below fgsm and jsma", passed, detail
    )
    assert passed


# --------------------------------------------------------------------------
# 5. robustness ordering under noise


def test_criterion_5_noise_robustness(experiments):
    columns = {m: noise_column(r) for m, r in experiments["robust"].items()}
    margin_ok = columns["greedy"][-1] >= columns["fgsm"][-1] + 0.10
    monotone_ok = True
    for column in columns.values():
        count, size = max_inversions(column)
        if count > 1 or size > 0.05:
            monotone_ok = False
    elapsed = experiments["robust_seconds"]
    passed = margin_ok and monotone_ok and elapsed < 1200
    detail = (
        f"sigma=0.25 greedy {columns['greedy'][-1]:.2f} vs fgsm "
        f"{columns['fgsm'][-1]:.2f}, {elapsed:.0f}s"
    )
    record_acceptance(
        5, "noise robustness: greedy leads fgsm by 0.10 and columns decay",
        passed, detail,
    )
    assert margin_ok, columns
    assert monotone_ok, columns
    assert elapsed < 1200


# --------------------------------------------------------------------------
# 6. jpeg ordering


def jpeg_r(report):
    for row in report.rows():
        if row.kind == "jpeg":
            return row.r
    raise AssertionError("no jpeg row")


def test_criterion_6_jpeg_robustness(experiments):
    greedy = jpeg_r(experiments["robust"]["greedy"])
    fgsm = jpeg_r(experiments["robust"]["fgsm"])
    passed = greedy is not None and fgsm is not None and greedy > fgsm
    record_acceptance(
        6, "jpeg q=60 robustness: greedy above fgsm", passed,
        f"greedy {greedy:.2f} vs fgsm {fgsm:.2f}",
    )
    assert passed


# --------------------------------------------------------------------------
# 7. metric and transform invariants


def test_criterion_7_invariant_suite(experiments):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    failures = []

    # distance: zero at identity, linear in the perturbation magnitude
    for _ in range(20):
        image = rng.random((9, 9, 1))
        sen = sensitivity_map(image)
        if perceptual_distance(image, image, sen) != 0.0:
            failures.append("D(X,X) != 0")
        delta = 0.01 * rng.standard_normal(image.shape)
        one = perceptual_distance(image, image + delta, sen)
        three = perceptual_distance(image, image + 3.0 * delta, sen)
        if abs(three - 3.0 * one) > 1e-9 * max(one, 1.0):
            failures.append("D not linear in the perturbation")

    # sensitivity: exact reciprocal of the floored window SD, so it is
    # anti-monotone in SD and capped at 1/floor
    for _ in range(10):
        image = rng.random((8, 8, 1))
        sen = sensitivity_map(image)
        sd = sd_map(image)
        if not np.array_equal(sen.values, 1.0 / np.maximum(sd, DEFAULT_SD_FLOOR)):
            failures.append("Sen != 1/max(SD, floor)")
    flat = sensitivity_map(np.full((6, 6, 1), 0.3))
    if not np.array_equal(flat.values, np.full((6, 6, 1), 1.0 / DEFAULT_SD_FLOOR)):
        failures.append("constant image not capped at 1/floor")

    # identity survival of successful budget-mode attacks is exactly 1
    identity_row = experiments["robust"]["greedy"].rows()[0]
    if identity_row.kind != "identity" or identity_row.r != 1.0:
        failures.append("R(identity) != 1")

    # every transform keeps images inside [0, 1]
    specs = [
        TransformSpec("noise", std=0.3),
        TransformSpec("blur", sigma=1.2),
        TransformSpec("jpeg", quality=30),
        TransformSpec("contrast", factor=1.8),
        TransformSpec("brightness", offset=0.4),
    ]
    for _ in range(10):
        image = rng.random((12, 12, 1))
        for spec in specs:
            out = spec.apply(image, seed=int(rng.integers(1 << 60)))
            if out.min() < 0.0 or out.max() > 1.0:
                failures.append(f"{spec.label} leaves [0,1]")

    # DCT round trip without quantization
    for _ in range(20):
        block = rng.random((8, 8))
        if np.abs(idct2_block(dct2_block(block)) - block).max() >= 1e-10:
            failures.append("DCT roundtrip error >= 1e-10")

    # constant images are fixed points of the parameter-neutral transforms
    const = np.full((10, 10, 1), 0.42)
    if np.abs(gaussian_blur(const, 1.5) - const).max() > 1e-12:
        failures.append("blur moves a constant image")
    if not np.array_equal(TransformSpec("contrast", factor=1.0).apply(const), const):
        failures.append("contrast(1) moves a constant image")
    if not np.array_equal(TransformSpec("brightness", offset=0.0).apply(const), const):
        failures.append("brightness(0) moves a constant image")

    elapsed = time.perf_counter() - t0
    passed = not failures and elapsed < 60
    record_acceptance(
        7, "metric and transform invariants hold", passed,
        f"{elapsed:.1f}s" + (f"; {failures}" if failures else ""),
    )
    assert not failures, failures
    assert elapsed < 60


# --------------------------------------------------------------------------
# 8. determinism


def test_criterion_8_reruns_bit_identical(world, experiments):
    rerun = run_pipeline(world)
    report_same = rerun["report_csv"] == experiments["report_csv"]
    records_same = rerun["records_csv"] == experiments["records_csv"]
    passed = report_same and records_same
    record_acceptance(
        8, "rerunning every experiment reproduces the CSVs byte for byte",
        passed,
        f"report {len(experiments['report_csv'])}B, records "
        f"{len(experiments['records_csv'])}B",
    )
    assert report_same
    assert records_same
