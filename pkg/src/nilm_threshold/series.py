"""Uniform-grid power/status series, resampling and windowing."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

INPUT_LENGTH = 510
OUTPUT_LENGTH = 480
DEFAULT_OVERLAP = 30


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SamplingSpec:
    period_seconds: int

    def __post_init__(self):
        if int(self.period_seconds) != self.period_seconds or self.period_seconds < 1:
            raise ConfigurationError(f"sampling period must be a positive integer, got {self.period_seconds!r}")
        object.__setattr__(self, "period_seconds", int(self.period_seconds))

    def factor_to(self, target: SamplingSpec) -> int:
        if target.period_seconds % self.period_seconds:
            raise ConfigurationError(
                f"target period {target.period_seconds}s is not a multiple of {self.period_seconds}s"
            )
        return target.period_seconds // self.period_seconds


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Nonnegative watt readings on a uniform grid."""

    values: np.ndarray
    sampling: SamplingSpec
    label: str = "aggregate"

    def __post_init__(self):
        arr = _frozen(self.values, np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InputError(f"{self.label}: power series must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"{self.label}: power series contains non-finite values")
        if np.any(arr < 0):
            raise InputError(f"{self.label}: power series contains negative readings")
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class StatusSeries:
    values: np.ndarray
    sampling: SamplingSpec

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 1:
            raise InputError("status series must be 1-D")
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise InputError("status values must be exactly 0 or 1")
        object.__setattr__(self, "values", _frozen(arr, np.int8))

    def __len__(self):
        return self.values.size


class WindowKind(enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True, eq=False)
class WindowPair:
    """One supervised example: aggregate input window and centered target window.

    ``start`` is the index of the first input sample in the source series.
    ``window_mean_watts`` is 0 until the pair is normalized.
    """

    input: np.ndarray
    target: np.ndarray
    kind: WindowKind = WindowKind.REGRESSION
    window_mean_watts: float = 0.0
    start: int = 0
    normalized: bool = False

    def __post_init__(self):
        inp = _frozen(self.input, np.float64)
        tgt = _frozen(self.target, np.float64)
        if inp.shape != (INPUT_LENGTH,) or tgt.shape != (OUTPUT_LENGTH,):
            raise InputError(
                f"window shapes must be ({INPUT_LENGTH},)/({OUTPUT_LENGTH},), got {inp.shape}/{tgt.shape}"
            )
        if self.kind is WindowKind.CLASSIFICATION and not np.all((tgt == 0) | (tgt == 1)):
            raise InputError("classification targets must be binary")
        object.__setattr__(self, "input", inp)
        object.__setattr__(self, "target", tgt)


def resample_mean(series: PowerSeries, target: SamplingSpec) -> PowerSeries:
    """Block-average ``series`` onto the coarser ``target`` grid, dropping a partial tail."""
    k = series.sampling.factor_to(target)
    n_out = len(series) // k
    if n_out == 0:
        raise InputError(f"{series.label}: {len(series)} samples is shorter than one {k}-sample block")
    if k == 1:
        return PowerSeries(series.values, target, series.label)
    blocks = series.values[: n_out * k].reshape(n_out, k)
    return PowerSeries(blocks.mean(axis=1), target, series.label)


def resample_status(status: StatusSeries, target: SamplingSpec) -> StatusSeries:
    """Majority vote per block (ties go ON, matching the ``>=`` convention)."""
    k = status.sampling.factor_to(target)
    n_out = len(status) // k
    if n_out == 0:
        raise InputError("status series shorter than one resampling block")
    blocks = status.values[: n_out * k].reshape(n_out, k).astype(np.int64)
    return StatusSeries((2 * blocks.sum(axis=1) >= k).astype(np.int8), target)


def window_starts(n: int, stride: int, input_length: int = INPUT_LENGTH) -> np.ndarray:
    if stride < 1:
        raise ConfigurationError("window stride must be >= 1")
    if n < input_length:
        raise InputError(f"series of length {n} is shorter than one {input_length}-sample window")
    return np.arange((n - input_length) // stride + 1) * stride


def windowize(
    aggregate: PowerSeries,
    appliance: PowerSeries,
    stride: int = INPUT_LENGTH - DEFAULT_OVERLAP,
) -> list[WindowPair]:
    """Cut aligned (input, centered target) regression pairs every ``stride`` samples."""
    if len(aggregate) != len(appliance):
        raise InputError(f"length mismatch: aggregate {len(aggregate)} vs {appliance.label} {len(appliance)}")
    if aggregate.sampling != appliance.sampling:
        raise InputError("aggregate and appliance series have different sampling")
    trim = (INPUT_LENGTH - OUTPUT_LENGTH) // 2
    pairs = []
    for start in window_starts(len(aggregate), stride):
        start = int(start)
        pairs.append(
            WindowPair(
                input=aggregate.values[start : start + INPUT_LENGTH],
                target=appliance.values[start + trim : start + trim + OUTPUT_LENGTH],
                start=start,
            )
        )
    return pairs


def status_windows(status: StatusSeries, starts) -> np.ndarray:
    """Centered target slices of ``status`` for the given window starts, shape (N, 480)."""
    trim = (INPUT_LENGTH - OUTPUT_LENGTH) // 2
    idx = np.asarray(starts, dtype=np.int64)[:, None] + trim + np.arange(OUTPUT_LENGTH)
    if idx.size and idx.max() >= len(status):
        raise InputError("window extends past the end of the status series")
    return status.values[idx].astype(np.float64)
