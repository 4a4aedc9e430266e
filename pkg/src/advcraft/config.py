"""INI-style run configuration with flags-win override semantics.

A config file groups keys by module section; every key has a matching
command-line flag, and an explicitly passed flag always beats the file
value.  Missing keys fall back to built-in defaults.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .attack import AttackConfig
from .errors import ConfigError, ParseError
from .transforms import TransformSpec, parse_grid

SECTIONS = ("dataset", "model", "train", "attack", "experiment", "output")


def load_config(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except configparser.Error as err:
        raise ParseError(f"{path}: {err}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown config section [{section}]")
    return parser


class Settings:
    """Layered lookup: explicit flag, then config file, then default."""

    def __init__(self, parser: configparser.ConfigParser | None):
        self._parser = parser

    def resolve(self, flag_value, section: str, key: str, cast, default):
        if flag_value is not None:
            return flag_value
        if self._parser is not None and self._parser.has_option(section, key):
            raw = self._parser.get(section, key)
            try:
                if cast is bool:
                    return raw.strip().lower() in ("1", "true", "yes", "on")
                return cast(raw)
            except ValueError:
                raise ConfigError(f"config [{section}] {key}: bad value '{raw}'") from None
        return default


@dataclass
class RunConfig:
    """Everything one full evaluation run needs, with paths validated."""

    images: str
    labels: str
    model: str
    attack: AttackConfig
    grid: list[TransformSpec] = field(default_factory=list)
    methods: list[str] = field(default_factory=lambda: ["greedy"])
    seed: int = 0
    count: int | None = None
    jobs: int = 1
    alpha: float = 0.001
    theta: float = 1.0
    output_dir: str = "."

    def __post_init__(self):
        # labels may be empty: cifar10 and directory datasets carry their own
        for label, path in (("images", self.images), ("labels", self.labels), ("model", self.model)):
            if (path or label != "labels") and not os.path.exists(path):
                raise ConfigError(f"{label} path does not exist: {path}")
        if self.seed < 0:
            raise ConfigError(f"experiment seed must be nonnegative, got {self.seed}")


def parse_methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    if not methods:
        raise ConfigError(f"no attack methods in '{text}'")
    return methods


def build_run_config(settings: Settings, args) -> RunConfig:
    """Assemble an evaluation RunConfig from flags over config over defaults."""
    grid_text = settings.resolve(args.grid, "experiment", "grid", str, "identity")
    methods_text = settings.resolve(args.methods, "experiment", "methods", str, "greedy")
    attack = AttackConfig(
        target=0,  # replaced per sample by the experiment driver
        smoothing=settings.resolve(args.smoothing, "attack", "smoothing", float, 100.0),
        pixels_per_step=settings.resolve(args.pixels, "attack", "pixels_per_step", int, 20),
        step=settings.resolve(args.step, "attack", "step", float, 0.01),
        distance_budget=settings.resolve(args.budget, "attack", "distance_budget", float, 70.0),
        mode=settings.resolve(args.mode, "attack", "mode", str, "budget"),
        max_iters=settings.resolve(args.max_iters, "attack", "max_iters", int, 5000),
    )
    return RunConfig(
        images=settings.resolve(args.images, "dataset", "images", str, None) or "",
        labels=settings.resolve(args.labels, "dataset", "labels", str, None) or "",
        model=settings.resolve(args.model, "model", "path", str, None) or "",
        attack=attack,
        grid=parse_grid(grid_text),
        methods=parse_methods(methods_text),
        seed=settings.resolve(args.seed, "experiment", "seed", int, 0),
        count=settings.resolve(args.count, "experiment", "count", int, None),
        jobs=settings.resolve(args.jobs, "experiment", "jobs", int, os.cpu_count() or 1),
        alpha=settings.resolve(args.alpha, "attack", "alpha", float, 0.001),
        theta=settings.resolve(args.theta, "attack", "theta", float, 1.0),
        output_dir=settings.resolve(args.output_dir, "output", "dir", str, "."),
    )
