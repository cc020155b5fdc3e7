"""Synthetic households: appliance templates on a uniform grid plus a residual load.

Ground-truth status marks where an appliance template is active, independent of
its power level or noise, so thresholding methods can be scored against it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .seeding import derive_seed
from .series import PowerSeries, SamplingSpec, StatusSeries

# Shape constants (fractions of the event length or of on_watts).
TWO_PEAK_EDGE = 0.3
TWO_PEAK_LOW = 0.08
BURST_SPIKE = 0.15
BURST_HIGH = 0.3
BURST_LOW = 0.12
BURST_HALF_PERIOD = 2


class ProfileKind(str, enum.Enum):
    PERIODIC_RECT = "PeriodicRect"
    TWO_PEAK_CYCLE = "TwoPeakCycle"
    BURST_CYCLE = "BurstCycle"


@dataclass(frozen=True)
class ApplianceProfile:
    """``period_seconds`` is the nominal onset-to-onset spacing, jittered by +-``jitter``."""

    kind: ProfileKind
    on_watts: float
    period_seconds: float
    on_duration_seconds: float
    jitter: float = 0.0
    noise_sd: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.on_watts <= 0 or self.period_seconds <= 0 or self.on_duration_seconds <= 0:
            raise ConfigurationError(f"{self.name or self.kind.value}: powers and durations must be positive")
        if not 0 <= self.jitter < 1:
            raise ConfigurationError(f"{self.name or self.kind.value}: jitter must lie in [0, 1)")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be nonnegative")


FRIDGE = ApplianceProfile(ProfileKind.PERIODIC_RECT, 100.0, 3000.0, 1200.0, jitter=0.15, noise_sd=2.0, name="fridge")
DISHWASHER = ApplianceProfile(
    ProfileKind.TWO_PEAK_CYCLE, 2200.0, 16 * 3600.0, 90 * 60.0, jitter=0.35, noise_sd=5.0, name="dishwasher"
)
WASHING_MACHINE = ApplianceProfile(
    ProfileKind.BURST_CYCLE, 1900.0, 20 * 3600.0, 100 * 60.0, jitter=0.35, noise_sd=5.0, name="washing_machine"
)
DEFAULT_PROFILES = (FRIDGE, DISHWASHER, WASHING_MACHINE)


def event_template(profile: ApplianceProfile, n: int) -> np.ndarray:
    """Noise-free power of one activation lasting ``n`` samples (all entries > 0)."""
    w = profile.on_watts
    if profile.kind is ProfileKind.PERIODIC_RECT:
        return np.full(n, w)
    if profile.kind is ProfileKind.TWO_PEAK_CYCLE:
        edge = max(1, int(round(TWO_PEAK_EDGE * n)))
        out = np.full(n, TWO_PEAK_LOW * w)
        out[:edge] = w
        out[max(edge, n - edge) :] = w
        return out
    spike = max(1, int(round(BURST_SPIKE * n)))
    out = np.full(n, w)
    phase = (np.arange(n - spike) // BURST_HALF_PERIOD) % 2
    out[spike:] = np.where(phase == 0, BURST_HIGH * w, BURST_LOW * w)
    return out


@dataclass
class ApplianceTrace:
    power: PowerSeries
    status: StatusSeries
    onsets: np.ndarray


def generate_appliance(
    profile: ApplianceProfile, length: int, seed: int, sampling: SamplingSpec = SamplingSpec(60)
) -> ApplianceTrace:
    """Lay jittered activations over ``length`` samples; returns power, true status and onset indices."""
    if length < 1:
        raise ConfigurationError("length must be >= 1")
    rng = np.random.default_rng(seed)
    dt = sampling.period_seconds
    n_on = max(1, int(round(profile.on_duration_seconds / dt)))
    period = profile.period_seconds / dt
    clean = np.zeros(length)
    status = np.zeros(length, dtype=np.int8)
    onsets = []
    t = int(rng.integers(0, max(1, int(np.ceil(period)))))
    template = event_template(profile, n_on)
    while t < length:
        onsets.append(t)
        end = min(length, t + n_on)
        clean[t:end] = template[: end - t]
        status[t:end] = 1
        step = int(round(period * (1 + profile.jitter * rng.uniform(-1, 1))))
        t += max(n_on + 1, step)
    noisy = clean + profile.noise_sd * rng.standard_normal(length) if profile.noise_sd else clean
    label = profile.name or profile.kind.value
    return ApplianceTrace(
        PowerSeries(np.maximum(noisy, 0.0), sampling, label), StatusSeries(status, sampling), np.array(onsets)
    )


@dataclass
class Household:
    aggregate: PowerSeries
    appliances: dict[str, ApplianceTrace] = field(default_factory=dict)
    residual: np.ndarray | None = None


def generate_household(
    profiles,
    residual_sd: float,
    length: int,
    seed: int,
    sampling: SamplingSpec = SamplingSpec(60),
    residual_mean: float = 0.0,
) -> Household:
    """Aggregate = sum of appliance traces + a nonnegative Gaussian residual clipped at 0."""
    if residual_sd < 0:
        raise ConfigurationError("residual_sd must be nonnegative")
    traces = {}
    total = np.zeros(length)
    for i, profile in enumerate(profiles):
        trace = generate_appliance(profile, length, derive_seed(seed, i + 1), sampling)
        name = trace.power.label
        if name in traces:
            raise ConfigurationError(f"duplicate appliance name {name!r}")
        traces[name] = trace
        total += trace.power.values
    rng = np.random.default_rng(derive_seed(seed, 0))
    residual = np.maximum(residual_mean + residual_sd * rng.standard_normal(length), 0.0)
    return Household(PowerSeries(total + residual, sampling, "aggregate"), traces, residual)
