"""Robustness experiments: attack a sample set, stress survivors with
transforms, and report the fraction still classified as the target.

The headline metric R for one transform is

    R = (# originally-correct, attack-successful samples whose transformed
         adversarial image still classifies as the target)
      / (# originally-correct, attack-successful samples)

A zero denominator makes R undefined; reports print NA rather than 0.
Every random choice (per-sample target class, per-transform noise seed)
derives from one master seed through numpy SeedSequence splits keyed by
sample index, so any cell of a report can be reproduced in isolation.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .attack import ATTACKS, AttackConfig, fgsm_attack, greedy_attack, jsma_attack
from .errors import ConfigError, StalledAttackError, UndefinedMetricError
from .nn import Network, forward
from .perception import sensitivity_map
from .transforms import TransformSpec

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


def indicator_c(net: Network, image, label: int) -> int:
    """1 iff the network classifies ``image`` as ``label``.

    Probability ties resolve to the lowest class index, so an exact tie
    with a lower-indexed class counts against ``label``.
    """
    probs = forward(net, image)
    return int(int(np.argmax(probs)) == label)


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise UndefinedMetricError("Wilson interval needs at least one trial")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class RobustnessRecord:
    sample_id: int
    label: int
    original_prediction: int
    target: int
    attack_success: bool
    distance: float
    gap: float
    iterations: int
    stalled: bool = False
    survivals: dict[str, int] = field(default_factory=dict)

    @property
    def original_correct(self) -> bool:
        return self.original_prediction == self.label

    @property
    def qualifies(self) -> bool:
        """Counts toward R denominators (Eq.-style double indicator)."""
        return self.original_correct and self.attack_success


def robustness_r(records, transform_label: str) -> float:
    qualifying = [r for r in records if r.qualifies]
    if not qualifying:
        raise UndefinedMetricError(
            f"robustness undefined for '{transform_label}': no originally-correct, "
            "attack-successful samples"
        )
    return sum(r.survivals[transform_label] for r in qualifying) / len(qualifying)


@dataclass(frozen=True)
class ReportRow:
    method: str
    kind: str
    parameter: str
    numerator: int
    denominator: int

    @property
    def r(self) -> float | None:
        return self.numerator / self.denominator if self.denominator else None

    @property
    def interval(self) -> tuple[float, float] | None:
        if not self.denominator:
            return None
        return wilson_interval(self.numerator, self.denominator)


@dataclass
class ExperimentReport:
    method: str
    grid: list[TransformSpec]
    records: list[RobustnessRecord]
    master_seed: int

    @property
    def sample_count(self) -> int:
        return len(self.records)

    @property
    def qualifying(self) -> list[RobustnessRecord]:
        return [r for r in self.records if r.qualifies]

    @property
    def success_rate(self) -> float:
        correct = [r for r in self.records if r.original_correct]
        if not correct:
            raise UndefinedMetricError("no originally-correct samples")
        return sum(r.attack_success for r in correct) / len(correct)

    @property
    def mean_distance(self) -> float | None:
        qualifying = self.qualifying
        if not qualifying:
            return None
        return sum(r.distance for r in qualifying) / len(qualifying)

    @property
    def mean_gap(self) -> float | None:
        qualifying = self.qualifying
        if not qualifying:
            return None
        return sum(r.gap for r in qualifying) / len(qualifying)

    def r_value(self, transform_label: str) -> float:
        return robustness_r(self.records, transform_label)

    def rows(self) -> list[ReportRow]:
        qualifying = self.qualifying
        rows = []
        for spec in self.grid:
            numerator = sum(r.survivals[spec.label] for r in qualifying)
            rows.append(
                ReportRow(self.method, spec.kind, spec.parameter, numerator, len(qualifying))
            )
        return rows


# --------------------------------------------------------------------------
# Experiment driver


def assign_target(label: int, class_count: int, master_seed: int, sample_id: int) -> int:
    """Uniform target among classes != label; reproducible per sample."""
    if class_count < 2:
        raise ConfigError("target assignment needs at least two classes")
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, sample_id, 0]))
    draw = int(rng.integers(0, class_count - 1))
    return draw + (draw >= label)


def transform_seed(master_seed: int, sample_id: int) -> int:
    """Noise seed for one sample, shared by every transform in the grid.

    Sharing one realization across a parameter sweep (common random
    numbers) pairs the comparisons: noise at increasing strength scales
    the same draw, so per-sample survival degrades monotonically instead
    of re-rolling at every grid point.
    """
    state = np.random.SeedSequence([master_seed, sample_id, 1])
    return int(state.generate_state(1, dtype=np.uint64)[0])


def _run_attack(net, image, cfg, method, alpha, theta, sen):
    if method == "greedy":
        return greedy_attack(net, image, cfg, sen=sen)
    if method == "fgsm":
        return fgsm_attack(
            net,
            image,
            cfg.target,
            alpha=alpha,
            max_iters=cfg.max_iters,
            distance_budget=cfg.distance_budget,
            sen=sen,
            mode=cfg.mode,
            smoothing=cfg.smoothing,
        )
    if method == "jsma":
        return jsma_attack(
            net,
            image,
            cfg.target,
            theta=theta,
            distance_budget=cfg.distance_budget,
            sen=sen,
            mode=cfg.mode,
            max_iters=cfg.max_iters,
            smoothing=cfg.smoothing,
        )
    raise ConfigError(f"unknown attack method '{method}' (want one of {sorted(ATTACKS)})")


def evaluate_sample(args) -> RobustnessRecord:
    """One sample's full pipeline; top level so process pools can ship it."""
    (net, image, label, sample_id, method, cfg, grid, master_seed, alpha, theta) = args
    image = np.asarray(image, dtype=np.float64)
    probs = forward(net, image)
    original_prediction = int(np.argmax(probs))
    target = assign_target(label, net.class_count, master_seed, sample_id)
    record = RobustnessRecord(
        sample_id=sample_id,
        label=label,
        original_prediction=original_prediction,
        target=target,
        attack_success=False,
        distance=0.0,
        gap=0.0,
        iterations=0,
    )
    if original_prediction != label:
        return record  # contributes to no sums; skip the attack cost

    sen = sensitivity_map(image)
    cfg = replace(cfg, target=target)
    try:
        result = _run_attack(net, image, cfg, method, alpha, theta, sen)
    except StalledAttackError:
        record.stalled = True
        return record

    record.attack_success = result.success
    record.distance = result.distance
    record.gap = result.gap
    record.iterations = result.iterations
    if result.success:
        seed = transform_seed(master_seed, sample_id)
        for spec in grid:
            transformed = spec.apply(result.image, seed=seed)
            record.survivals[spec.label] = indicator_c(net, transformed, target)
    return record


def run_experiment(
    net: Network,
    images,
    labels,
    method: str,
    cfg: AttackConfig,
    grid: list[TransformSpec],
    master_seed: int = 0,
    jobs: int = 1,
    alpha: float = 0.001,
    theta: float = 1.0,
) -> ExperimentReport:
    """Attack each sample, stress survivors with every grid transform.

    Stalled attacks become failure records, never experiment aborts.
    Results are deterministic for a given master seed regardless of
    ``jobs``; samples are independent.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if images.ndim != 4 or len(images) != len(labels):
        raise ConfigError("need images shaped (n, h, w, c) with one label each")
    if len(images) == 0:
        raise ConfigError("experiment needs at least one sample")
    if method not in ATTACKS:
        raise ConfigError(f"unknown attack method '{method}' (want one of {sorted(ATTACKS)})")
    if jobs < 1:
        raise ConfigError(f"jobs must be at least 1, got {jobs}")

    tasks = [
        (net, images[i], int(labels[i]), i, method, cfg, grid, master_seed, alpha, theta)
        for i in range(len(images))
    ]
    if jobs == 1:
        records = [evaluate_sample(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(evaluate_sample, tasks, chunksize=1))
    return ExperimentReport(method=method, grid=grid, records=records, master_seed=master_seed)


# --------------------------------------------------------------------------
# Report I/O

REPORT_HEADER = [
    "method",
    "transform",
    "parameter",
    "numerator",
    "denominator",
    "r",
    "ci_low",
    "ci_high",
]


def _fmt_cell(value) -> str:
    return "NA" if value is None else repr(value)


def write_report_rows(reports, handle) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for report in reports:
        for row in report.rows():
            interval = row.interval
            writer.writerow(
                [
                    row.method,
                    row.kind,
                    row.parameter,
                    row.numerator,
                    row.denominator,
                    _fmt_cell(row.r),
                    _fmt_cell(interval[0] if interval else None),
                    _fmt_cell(interval[1] if interval else None),
                ]
            )


def read_report_rows(handle) -> list[dict]:
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise UndefinedMetricError("empty report") from None
    if header != REPORT_HEADER:
        raise ConfigError(f"unexpected report header {header}")
    return [dict(zip(header, row)) for row in reader]


def _row_cells(row) -> dict:
    if isinstance(row, ReportRow):
        interval = row.interval
        return {
            "method": row.method,
            "transform": row.kind,
            "parameter": row.parameter,
            "numerator": row.numerator,
            "denominator": row.denominator,
            "r": "NA" if row.r is None else row.r,
            "ci_low": interval[0] if interval else None,
            "ci_high": interval[1] if interval else None,
        }
    return row


def format_report_table(rows) -> str:
    """Human-readable fixed-width rendering of ReportRows or CSV dict rows."""
    lines = [
        f"{'method':<8} {'transform':<11} {'param':<10} {'n/d':>9} "
        f"{'R':>7} {'95% CI':>17}"
    ]
    for row in map(_row_cells, rows):
        ratio = f"{row['numerator']}/{row['denominator']}"
        if row["r"] == "NA":
            r_text, ci_text = "NA", ""
        else:
            r_text = f"{float(row['r']):.3f}"
            ci_text = f"[{float(row['ci_low']):.3f}, {float(row['ci_high']):.3f}]"
        lines.append(
            f"{row['method']:<8} {row['transform']:<11} {row['parameter']:<10} "
            f"{ratio:>9} {r_text:>7} {ci_text:>17}"
        )
    return "\n".join(lines)
