"""ON/OFF thresholding of appliance power: middle-point, variance-sensitive and activation-time."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateClusterError, InputError
from .series import PowerSeries, SamplingSpec, StatusSeries


class Method(str, enum.Enum):
    MP = "MP"
    VS = "VS"
    AT = "AT"

    @classmethod
    def parse(cls, text) -> Method:
        try:
            return cls(str(text).strip().upper())
        except ValueError:
            raise ConfigurationError(f"unknown threshold method {text!r} (expected MP, VS or AT)") from None


@dataclass(frozen=True)
class ClusterSummary:
    m0: float
    m1: float
    sigma0: float
    sigma1: float
    n0: int
    n1: int


@dataclass(frozen=True)
class ThresholdSpec:
    method: Method
    lambda_watts: float
    mu_off_seconds: float = 0.0
    mu_on_seconds: float = 0.0

    def __post_init__(self):
        if self.lambda_watts < 0 or self.mu_off_seconds < 0 or self.mu_on_seconds < 0:
            raise ConfigurationError("threshold parameters must be nonnegative")
        if self.method is not Method.AT and (self.mu_off_seconds or self.mu_on_seconds):
            raise ConfigurationError("duration thresholds only apply to AT")


# (lambda W, mu_off s, mu_on s) used for activation-time thresholding.
AT_DEFAULTS = {
    "dishwasher": ThresholdSpec(Method.AT, 10.0, 30.0, 30.0),
    "fridge": ThresholdSpec(Method.AT, 50.0, 1.0, 1.0),
    "washing_machine": ThresholdSpec(Method.AT, 20.0, 3.0, 30.0),
}


def kmeans_1d_two(values) -> ClusterSummary:
    """Globally optimal 2-means of scalar data.

    In one dimension the optimal clusters are contiguous in sorted order, so
    every boundary between distinct sorted values is scored by its total
    within-cluster sum of squares and the best one kept.
    """
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if x.size < 2 or x[0] == x[-1]:
        raise DegenerateClusterError("need at least two distinct values to split into ON/OFF clusters")
    n = x.size
    # centering keeps the prefix-sum SSE formula well conditioned
    xc = x - x.mean()
    s1 = np.cumsum(xc)
    s2 = np.cumsum(xc * xc)
    total1, total2 = s1[-1], s2[-1]
    i = np.flatnonzero(x[1:] > x[:-1]) + 1  # candidate sizes of the lower cluster
    left1, left2 = s1[i - 1], s2[i - 1]
    right1, right2 = total1 - left1, total2 - left2
    sse = (left2 - left1 * left1 / i) + (right2 - right1 * right1 / (n - i))
    split = int(i[np.argmin(sse)])
    low, high = x[:split], x[split:]
    return ClusterSummary(
        m0=float(low.mean()),
        m1=float(high.mean()),
        sigma0=float(low.std()),
        sigma1=float(high.std()),
        n0=int(low.size),
        n1=int(high.size),
    )


def threshold_mp(summary: ClusterSummary) -> ThresholdSpec:
    return ThresholdSpec(Method.MP, (summary.m0 + summary.m1) / 2)


def threshold_vs(summary: ClusterSummary) -> ThresholdSpec:
    """Shift the cut toward the tighter cluster; falls back to the midpoint when both spreads are 0."""
    spread = summary.sigma0 + summary.sigma1
    if spread <= 0:
        return ThresholdSpec(Method.VS, (summary.m0 + summary.m1) / 2)
    d = summary.sigma0 / spread
    return ThresholdSpec(Method.VS, (1 - d) * summary.m0 + d * summary.m1)


def apply_power_threshold(power: PowerSeries, lambda_watts: float) -> StatusSeries:
    return StatusSeries((power.values >= lambda_watts).astype(np.int8), power.sampling)


def duration_samples(seconds: float, sampling: SamplingSpec) -> int:
    return int(math.ceil(seconds / sampling.period_seconds))


def _runs(values: np.ndarray):
    """Return (starts, lengths, labels) of maximal constant runs."""
    if values.size == 0:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0, values.dtype)
    edges = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], edges))
    lengths = np.diff(np.concatenate((starts, [values.size])))
    return starts, lengths, values[starts]


def filter_runs(values: np.ndarray, min_off: int, min_on: int) -> np.ndarray:
    """Sample-count form of :func:`duration_filter` on a raw 0/1 array."""
    out = np.array(values, dtype=np.int8, copy=True)
    if min_off > 0:
        starts, lengths, labels = _runs(out)
        # an OFF run not at the start is always preceded by an ON run
        for s, n in zip(starts[1:], lengths[1:]):
            if out[s] == 0 and n < min_off:
                out[s : s + n] = 1
    if min_on > 0:
        starts, lengths, labels = _runs(out)
        for s, n, lab in zip(starts, lengths, labels):
            if lab == 1 and n < min_on:
                out[s : s + n] = 0
    return out


def duration_filter(status: StatusSeries, mu_off_seconds: float, mu_on_seconds: float) -> StatusSeries:
    """Fill OFF gaps shorter than ``mu_off`` that follow an ON state, then drop ON runs shorter than ``mu_on``.

    Durations are converted to sample counts with a ceiling. An OFF run at the very
    start of the series has no previous state and is left alone.
    """
    min_off = duration_samples(mu_off_seconds, status.sampling)
    min_on = duration_samples(mu_on_seconds, status.sampling)
    return StatusSeries(filter_runs(status.values, min_off, min_on), status.sampling)


def threshold_at(power: PowerSeries, spec: ThresholdSpec) -> StatusSeries:
    status = apply_power_threshold(power, spec.lambda_watts)
    return duration_filter(status, spec.mu_off_seconds, spec.mu_on_seconds)


def apply_threshold(power: PowerSeries, spec: ThresholdSpec) -> StatusSeries:
    """Status series for any method (the duration pass is a no-op for MP/VS)."""
    if spec.method is Method.AT:
        return threshold_at(power, spec)
    return apply_power_threshold(power, spec.lambda_watts)


def derive_threshold(
    train_power, method, at_defaults: ThresholdSpec | None = None, appliance: str | None = None
) -> ThresholdSpec:
    """Resolve a threshold from training power alone (MP/VS) or from AT parameters."""
    method = Method.parse(method.value if isinstance(method, Method) else method)
    if method is Method.AT:
        spec = at_defaults
        if spec is None:
            if appliance not in AT_DEFAULTS:
                raise ConfigurationError(f"no activation-time parameters for appliance {appliance!r}")
            spec = AT_DEFAULTS[appliance]
        if spec.method is not Method.AT:
            raise ConfigurationError("AT defaults must be an AT ThresholdSpec")
        return spec
    values = train_power.values if isinstance(train_power, PowerSeries) else np.asarray(train_power, float)
    if values.size == 0:
        raise InputError("no training power values to cluster")
    summary = kmeans_1d_two(values)
    return threshold_mp(summary) if method is Method.MP else threshold_vs(summary)


def threshold_record(appliance: str, spec: ThresholdSpec, summary: ClusterSummary | None) -> dict:
    return {
        "appliance": appliance,
        "method": spec.method.value,
        "lambda_watts": spec.lambda_watts,
        "mu_off_seconds": spec.mu_off_seconds,
        "mu_on_seconds": spec.mu_on_seconds,
        "m0": None if summary is None else summary.m0,
        "m1": None if summary is None else summary.m1,
        "sigma0": None if summary is None else summary.sigma0,
        "sigma1": None if summary is None else summary.sigma1,
    }
