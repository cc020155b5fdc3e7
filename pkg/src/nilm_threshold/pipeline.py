"""End-to-end steps shared by the command line and the experiments.

An :class:`ApplianceProblem` holds everything derived for one appliance: the
split windows, the thresholds fitted on the training targets, the status
targets each thresholding method produces, and the ON/OFF reconstruction levels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import ConfigurationError, InputError
from .ingestion import (
    Dataset,
    NormalizationSpec,
    activation_fraction,
    chronological_split,
    normalize_pair,
    parse_power_csv,
    random_split,
    with_status_targets,
)
from .metrics import classification_scores, mae, predicted_status, status_f1
from .model import LossWeights, ModelParams, TrainingSet, build_conv_model, predict, train
from .model.train import TrainResult
from .reconstruction import OnOffLevels, compute_levels, intrinsic_error, reconstruct_binary
from .seeding import INIT, SHUFFLE, SPLIT, derive_seed
from .series import (
    INPUT_LENGTH,
    OUTPUT_LENGTH,
    PowerSeries,
    SamplingSpec,
    StatusSeries,
    WindowPair,
    resample_mean,
    resample_status,
    windowize,
)
from .thresholding import (
    ClusterSummary,
    Method,
    ThresholdSpec,
    apply_threshold,
    derive_threshold,
    kmeans_1d_two,
)

log = logging.getLogger(__name__)
TRIM = (INPUT_LENGTH - OUTPUT_LENGTH) // 2
SPLITS = ("train", "val", "test")


@dataclass
class Building:
    """One meter file: series at the working resolution plus the native ones."""

    aggregate: PowerSeries
    appliances: dict[str, PowerSeries]
    native: dict[str, PowerSeries] = field(default_factory=dict)


def load_buildings(config: RunConfig) -> list[Building]:
    if not config.data_paths:
        raise ConfigurationError("data.paths is empty; point it at one or more CSV files")
    columns = {"aggregate": config.data_aggregate_column}
    columns.update({a: a for a in config.data_appliances})
    target = SamplingSpec(config.sampling_target_period_seconds)
    buildings = []
    for path in config.data_paths:
        meter = parse_power_csv(path, columns, config.data_period_seconds, config.data_fill_limit)
        native = {s.label: s for s in meter.series}
        working = {label: resample_mean(s, target) for label, s in native.items()}
        agg = working.pop("aggregate")
        buildings.append(Building(agg, working, native))
    return buildings


def building_from_series(aggregate: PowerSeries, appliances: dict[str, PowerSeries]) -> Building:
    return Building(aggregate, dict(appliances), {"aggregate": aggregate, **appliances})


@dataclass
class ApplianceProblem:
    appliance: str
    config: RunConfig
    buildings: list[Building]
    splits: dict[str, Dataset]  # normalized regression windows
    sources: dict[str, np.ndarray]  # building index of each window
    thresholds: dict[Method, ThresholdSpec]
    summary: ClusterSummary
    status_series: dict[Method, list[StatusSeries]]  # per building, working resolution
    levels: dict[Method, OnOffLevels]

    @property
    def reference_watts(self) -> float:
        return self.config.normalization_reference_watts

    def power_watts(self, split: str) -> np.ndarray:
        """Un-normalized target power of a split, (N, 480), read from the source series."""
        return self._slices(split, lambda b: self.buildings[b].appliances[self.appliance].values)

    def status(self, split: str, method: Method) -> np.ndarray:
        return self._slices(split, lambda b: self.status_series[method][b].values.astype(np.float64))

    def _slices(self, split, getter) -> np.ndarray:
        ds = self.splits[split]
        out = np.zeros((len(ds), OUTPUT_LENGTH))
        for i, (start, b) in enumerate(zip(ds.starts(), self.sources[split])):
            out[i] = getter(int(b))[start + TRIM : start + TRIM + OUTPUT_LENGTH]
        return out

    def training_set(self, method: Method, split: str = "train") -> TrainingSet:
        ds = self.splits[split]
        return TrainingSet(ds.inputs(), self.status(split, method), ds.targets())

    def dense_training_set(self, method: Method) -> TrainingSet:
        """Training windows cut every ``window.train_stride`` samples inside the training span.

        A dense window is kept only when its whole input lies inside samples already
        covered by training windows, so no validation or test target leaks in.
        """
        stride = self.config.train_stride
        if stride == self.config.eval_stride:
            return self.training_set(method)
        norm = NormalizationSpec(self.reference_watts)
        inputs, status, power = [], [], []
        ds = self.splits["train"]
        for b, building in enumerate(self.buildings):
            starts = ds.starts()[self.sources["train"] == b]
            if len(starts) == 0:
                continue
            n = len(building.aggregate)
            covered = np.zeros(n + 1, dtype=np.int64)
            for s in starts:
                covered[s] += 1
                covered[s + INPUT_LENGTH] -= 1
            inside = np.cumsum(covered)[:n] > 0
            ok = np.concatenate([[0], np.cumsum(inside)])
            app = building.appliances[self.appliance]
            st = self.status_series[method][b].values
            for s in range(0, n - INPUT_LENGTH + 1, stride):
                if ok[s + INPUT_LENGTH] - ok[s] != INPUT_LENGTH:
                    continue
                pair = normalize_pair(windowize_one(building.aggregate, app, s), norm)
                inputs.append(pair.input)
                power.append(pair.target)
                status.append(st[s + TRIM : s + TRIM + OUTPUT_LENGTH].astype(np.float64))
        return TrainingSet(np.array(inputs), np.array(status), np.array(power))


def windowize_one(aggregate: PowerSeries, appliance: PowerSeries, start: int) -> WindowPair:
    return WindowPair(
        aggregate.values[start : start + INPUT_LENGTH],
        appliance.values[start + TRIM : start + TRIM + OUTPUT_LENGTH],
        start=start,
    )


def _split_windows(config: RunConfig, buildings: list[Building], appliance: str, appliance_index: int):
    norm = NormalizationSpec(config.normalization_reference_watts)
    per_building, owner = [], {}
    for b, building in enumerate(buildings):
        if appliance not in building.appliances:
            raise InputError(f"building {b} has no {appliance!r} column")
        pairs = windowize(building.aggregate, building.appliances[appliance], config.eval_stride)
        pairs = [normalize_pair(p, norm) for p in pairs]
        owner.update((id(p), b) for p in pairs)
        per_building.append(pairs)
    if config.split_mode == "chronological":
        tagged = chronological_split(per_building, config.split_fractions, config.split_val_test_building, appliance)
    else:
        flat = [p for pairs in per_building for p in pairs]
        seed = derive_seed(config.seed, SPLIT, appliance_index)
        tagged = random_split(flat, config.split_fractions, seed, appliance)
    splits = dict(zip(SPLITS, tagged))
    sources = {name: np.array([owner[id(p)] for p in ds.pairs], dtype=np.int64) for name, ds in splits.items()}
    if len(splits["train"]) == 0:
        raise InputError(f"{appliance}: no training windows; the series is too short for the split")
    return splits, sources


def _training_mask(config: RunConfig, problem_splits, sources, b: int, n: int, factor: int) -> np.ndarray:
    """Samples (at a resolution ``factor`` times finer than the working grid) under training targets."""
    mask = np.zeros(n, dtype=bool)
    ds = problem_splits["train"]
    for start, src in zip(ds.starts(), sources["train"]):
        if src == b:
            mask[(start + TRIM) * factor : (start + TRIM + OUTPUT_LENGTH) * factor] = True
    return mask


def build_problem(config: RunConfig, buildings: list[Building], appliance: str) -> ApplianceProblem:
    """Split windows, fit thresholds on the training targets, and derive status and levels."""
    if appliance not in config.data_appliances:
        raise ConfigurationError(f"{appliance!r} is not listed in data.appliances")
    index = config.data_appliances.index(appliance)
    splits, sources = _split_windows(config, buildings, appliance, index)
    target = SamplingSpec(config.sampling_target_period_seconds)

    native = config.threshold_native_resolution
    series_for_threshold = []
    for b, building in enumerate(buildings):
        s = building.native.get(appliance, building.appliances[appliance]) if native else building.appliances[appliance]
        factor = s.sampling.factor_to(target) if native else 1
        mask = _training_mask(config, splits, sources, b, len(s), factor)
        series_for_threshold.append((s, mask))
    train_power = np.concatenate([s.values[m] for s, m in series_for_threshold])
    summary = kmeans_1d_two(train_power)

    thresholds, status_series, levels = {}, {}, {}
    at_specs = config.at_specs()
    train_watts = appliance_windows(buildings, splits, sources, appliance, "train")
    for method in config.methods():
        spec = derive_threshold(train_power, method, at_defaults=at_specs.get(appliance), appliance=appliance)
        thresholds[method] = spec
        per_building = []
        for b, building in enumerate(buildings):
            s, _ = series_for_threshold[b]
            status = apply_threshold(s, spec)
            if status.sampling != target:
                status = resample_status(status, target)
            per_building.append(status)
        status_series[method] = per_building
        train_status = np.concatenate(
            [per_building[int(src)].values[st + TRIM : st + TRIM + OUTPUT_LENGTH]
             for st, src in zip(splits["train"].starts(), sources["train"])]
        )  # fmt: skip
        levels[method] = compute_levels(train_watts, train_status, config.reconstruction_mode)
    return ApplianceProblem(appliance, config, buildings, splits, sources, thresholds, summary, status_series, levels)


def appliance_windows(buildings, splits, sources, appliance: str, split: str) -> np.ndarray:
    ds = splits[split]
    chunks = [
        buildings[int(b)].appliances[appliance].values[s + TRIM : s + TRIM + OUTPUT_LENGTH]
        for s, b in zip(ds.starts(), sources[split])
    ]
    return np.concatenate(chunks) if chunks else np.zeros(0)


def build_problems(config: RunConfig, buildings: list[Building]) -> dict[str, ApplianceProblem]:
    return {a: build_problem(config, buildings, a) for a in config.data_appliances}


def activation_percent(problem: ApplianceProblem, method: Method, split: str) -> float | None:
    ds = problem.splits[split]
    if len(ds) == 0:
        return None
    return activation_fraction(with_status_targets(ds, problem.status(split, method)))


def intrinsic_errors(problem: ApplianceProblem, method: Method) -> dict[str, float | None]:
    """Reconstruction floor on each split, using levels fitted on the training split."""
    out = {}
    for split in SPLITS:
        if len(problem.splits[split]) == 0:
            out[split] = None
            continue
        truth = problem.power_watts(split)
        bp = reconstruct_binary(problem.status(split, method), problem.levels[method])
        out[split] = mae(bp, truth)
    return out


def training_intrinsic_error(problem: ApplianceProblem, method: Method) -> float:
    truth = problem.power_watts("train")
    return intrinsic_error(truth.ravel(), problem.status("train", method).ravel(), problem.config.reconstruction_mode)


# --- models ---------------------------------------------------------------


def model_seeds(config: RunConfig, appliance: str, repetition: int = 0) -> tuple[int, int]:
    root = config.seed + repetition
    index = config.data_appliances.index(appliance)
    return derive_seed(root, INIT, index), derive_seed(root, SHUFFLE, index)


def train_model(
    problem: ApplianceProblem, method: Method, w: float, repetition: int = 0
) -> TrainResult:
    config = problem.config
    init_seed, shuffle_seed = model_seeds(config, problem.appliance, repetition)
    params = build_conv_model(config.model_width_scale, init_seed)
    train_set = problem.dense_training_set(method)
    val_set = problem.training_set(method, "val") if len(problem.splits["val"]) else None
    log.info(
        "training %s/%s w=%.2f on %d windows for %d epochs",
        problem.appliance, method.value, w, len(train_set), config.train_epochs,
    )  # fmt: skip
    return train(
        params,
        train_set,
        val_set,
        LossWeights(w, config.loss_k),
        epochs=config.train_epochs,
        batch_size=config.train_batch_size,
        lr=config.train_learning_rate,
        seed=shuffle_seed,
        reference_watts=problem.reference_watts,
    )


def score_predictions(problem: ApplianceProblem, method: Method, prob, power_norm, split: str = "test") -> dict:
    """Classification, regression and reconstruction scores for given predictions on a split."""
    truth_status = problem.status(split, method)
    truth_watts = problem.power_watts(split)
    power_watts = np.asarray(power_norm) * problem.reference_watts
    scores = classification_scores(prob, truth_status)
    bp = reconstruct_binary(predicted_status(prob), problem.levels[method])
    spec = problem.thresholds[method]
    sampling = SamplingSpec(problem.config.sampling_target_period_seconds)
    regression_status = np.stack(
        [apply_threshold(PowerSeries(np.maximum(row, 0.0), sampling), spec).values for row in power_watts]
    )
    scores.update(
        {
            "mae_watts": mae(power_watts, truth_watts),
            "reconstruction_mae_watts": mae(bp, truth_watts),
            "regression_f1": status_f1(regression_status, truth_status),
        }
    )
    return scores


def evaluate_model(problem: ApplianceProblem, method: Method, params: ModelParams, split: str = "test") -> dict:
    if len(problem.splits[split]) == 0:
        raise InputError(f"{problem.appliance}: the {split} split is empty")
    prob, power = predict(params, problem.splits[split].inputs())
    return score_predictions(problem, method, prob, power, split)


def sweep_point(problem: ApplianceProblem, method: Method, w: float, repetition: int) -> dict:
    """Train one model and report the F1 / MAE pair used for a weight sweep.

    At w = 0 the status head is untrained, so F1 comes from thresholding the
    regression output; at w = 1 the power head is untrained, so MAE comes from
    the binary reconstruction of the predicted status.
    """
    result = train_model(problem, method, w, repetition)
    scores = evaluate_model(problem, method, result.params)
    f1_kind = "thresholded_regression" if w == 0 else "classification"
    mae_kind = "reconstruction" if w == 1 else "regression"
    return {
        "appliance": problem.appliance,
        "w": float(w),
        "seed": problem.config.seed + repetition,
        "f1": scores["regression_f1"] if w == 0 else scores["f1"],
        "mae_watts": scores["reconstruction_mae_watts"] if w == 1 else scores["mae_watts"],
        "f1_kind": f1_kind,
        "mae_kind": mae_kind,
    }
