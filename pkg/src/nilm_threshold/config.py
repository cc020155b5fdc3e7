"""Run configuration: a flat ``key = value`` file plus ``--set key=value`` overrides.

Grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines are
ignored. Keys are ``section.name`` (or the bare ``seed``); list values are
comma separated. Every key has a default, so an empty file is a valid config.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError
from .thresholding import Method, ThresholdSpec

SECTIONS = (
    "data", "sampling", "window", "normalization", "split", "threshold", "reconstruction",
    "model", "train", "loss", "sweep", "synth", "output",
)  # fmt: skip
# keys that cannot change any numeric output and are left out of the config hash
UNHASHED = {"output.dir", "sweep.workers"}


@dataclass(frozen=True)
class RunConfig:
    data_paths: tuple[str, ...] = ()
    data_period_seconds: int = 6
    data_aggregate_column: str = "aggregate"
    data_appliances: tuple[str, ...] = ("fridge", "dishwasher", "washing_machine")
    data_fill_limit: int = 5
    sampling_target_period_seconds: int = 60
    window_input_length: int = 510
    window_output_length: int = 480
    window_overlap: int = 30
    window_train_stride: int = 0  # 0 means the evaluation stride (input length - overlap)
    normalization_reference_watts: float = 2000.0
    split_mode: str = "chronological"
    split_fractions: tuple[float, ...] = (0.8, 0.1, 0.1)
    split_val_test_building: int = 0
    seed: int = 0
    threshold_methods: tuple[str, ...] = ("MP", "VS", "AT")
    threshold_at: tuple[str, ...] = ("dishwasher:10:30:30", "fridge:50:1:1", "washing_machine:20:3:30")
    threshold_native_resolution: bool = False
    reconstruction_mode: str = "conditional"
    model_width_scale: float = 0.25
    train_epochs: int = 50
    train_batch_size: int = 32
    train_learning_rate: float = 1e-4
    train_methods: tuple[str, ...] = ("MP", "VS", "AT")
    loss_w: float = 1.0
    loss_k: float = 0.0066
    sweep_weights: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    sweep_repetitions: int = 5
    sweep_method: str = "MP"
    sweep_workers: int = 1
    synth_days: float = 14.0
    synth_period_seconds: int = 60
    synth_residual_sd: float = 20.0
    synth_residual_mean: float = 0.0
    synth_buildings: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.window_input_length != 510 or self.window_output_length != 480:
            raise ConfigurationError("the model is built for 510-sample inputs and 480-sample outputs")
        if not 0 <= self.window_overlap < self.window_input_length:
            raise ConfigurationError("window.overlap must lie in [0, input length)")
        counts = {
            "data.period_seconds": self.data_period_seconds,
            "sampling.target_period_seconds": self.sampling_target_period_seconds,
            "train.batch_size": self.train_batch_size,
            "sweep.repetitions": self.sweep_repetitions,
            "sweep.workers": self.sweep_workers,
            "synth.period_seconds": self.synth_period_seconds,
            "synth.buildings": self.synth_buildings,
        }
        for key, value in counts.items():
            if value < 1:
                raise ConfigurationError(f"{key} must be positive")
        if self.train_epochs < 0 or self.window_train_stride < 0 or self.data_fill_limit < 0:
            raise ConfigurationError("train.epochs, window.train_stride and data.fill_limit must be >= 0")
        if not 0 <= self.loss_w <= 1 or any(not 0 <= w <= 1 for w in self.sweep_weights):
            raise ConfigurationError("loss weights must lie in [0, 1]")
        if self.loss_k <= 0 or self.normalization_reference_watts <= 0 or self.train_learning_rate <= 0:
            raise ConfigurationError("loss.k, normalization.reference_watts and train.learning_rate must be positive")
        if self.split_mode not in ("chronological", "random"):
            raise ConfigurationError(f"split.mode must be chronological or random, got {self.split_mode!r}")
        if self.reconstruction_mode not in ("conditional", "literal"):
            raise ConfigurationError("reconstruction.mode must be conditional or literal")
        for m in self.threshold_methods + self.train_methods + (self.sweep_method,):
            Method.parse(m)
        self.at_specs()

    @property
    def eval_stride(self) -> int:
        return self.window_input_length - self.window_overlap

    @property
    def train_stride(self) -> int:
        return self.window_train_stride or self.eval_stride

    def methods(self) -> list[Method]:
        return [Method.parse(m) for m in self.threshold_methods]

    def at_specs(self) -> dict[str, ThresholdSpec]:
        """Per-appliance AT parameters from ``name:lambda:mu_off:mu_on`` entries."""
        specs = {}
        for entry in self.threshold_at:
            parts = entry.split(":")
            if len(parts) != 4:
                raise ConfigurationError(f"threshold.at entry {entry!r} is not name:lambda:mu_off:mu_on")
            try:
                lam, mu0, mu1 = (float(p) for p in parts[1:])
            except ValueError:
                raise ConfigurationError(f"threshold.at entry {entry!r} has a non-numeric value") from None
            specs[parts[0].strip()] = ThresholdSpec(Method.AT, lam, mu0, mu1)
        return specs

    def to_text(self, include_unhashed: bool = True) -> str:
        lines = []
        for f in fields(self):
            key = field_key(f.name)
            if not include_unhashed and key in UNHASHED:
                continue
            lines.append(f"{key} = {format_value(getattr(self, f.name))}")
        return "\n".join(sorted(lines)) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.to_text(include_unhashed=False).encode("utf-8")).hexdigest()

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


def field_key(name: str) -> str:
    head, _, tail = name.partition("_")
    return f"{head}.{tail}" if head in SECTIONS and tail else name


KEYS = {field_key(f.name): f.name for f in fields(RunConfig)}
DEFAULTS = RunConfig()


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, text: str):
    default = getattr(DEFAULTS, KEYS[key])
    text = text.strip()
    try:
        if isinstance(default, tuple):
            if not text:
                return ()
            elem = type(default[0]) if default else str
            return tuple(elem(t.strip()) for t in text.split(",") if t.strip())
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigurationError(f"invalid value for {key}: {text!r}") from None


def parse_assignment(line: str, where: str = "") -> tuple[str, str]:
    if "=" not in line:
        raise ConfigurationError(f"{where}expected key = value, got {line!r}")
    key, _, value = line.partition("=")
    key = key.strip()
    if key not in KEYS:
        raise ConfigurationError(f"{where}unknown config key {key!r}")
    return key, value


def load_config(path=None, overrides=(), seed: int | None = None, out: str | None = None) -> RunConfig:
    """Read ``path`` (optional), then apply ``overrides`` and the explicit seed/out flags.

    Relative ``data.paths`` in a file are resolved against the file's directory.
    """
    values = {}
    base = None
    if path is not None:
        path = Path(path)
        base = path.parent
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, value = parse_assignment(line, f"{path}:{lineno}: ")
            values[key] = parse_value(key, value)
        if "data.paths" in values:
            values["data.paths"] = tuple(str((base / p).resolve()) if not Path(p).is_absolute() else p for p in values["data.paths"])
    for item in overrides:
        key, value = parse_assignment(item, "--set: ")
        values[key] = parse_value(key, value)
    if seed is not None:
        values["seed"] = int(seed)
    if out is not None:
        values["output.dir"] = str(out)
    return RunConfig(**{KEYS[k]: v for k, v in values.items()})
