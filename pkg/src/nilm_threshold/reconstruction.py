"""Two-level power reconstruction from a status series and the resulting intrinsic error."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .series import PowerSeries, StatusSeries

MODES = ("conditional", "literal")


@dataclass(frozen=True)
class OnOffLevels:
    p_on: float
    p_off: float


def _arrays(power, status):
    p = power.values if isinstance(power, PowerSeries) else np.asarray(power, dtype=np.float64)
    s = status.values if isinstance(status, StatusSeries) else np.asarray(status)
    if p.shape != s.shape:
        raise InputError(f"power/status length mismatch: {p.shape} vs {s.shape}")
    return p.astype(np.float64, copy=False), s.astype(np.float64)


def _shifted_mean(x: np.ndarray) -> float:
    # exact for constant input, unlike sum / n
    if x.size == 0:
        return 0.0
    base = float(x.min())
    return base + float(np.mean(x - base))


def compute_levels(power, status, mode: str = "conditional") -> OnOffLevels:
    """Mean power while ON and while OFF.

    ``conditional`` divides by the number of samples in each state (a state that
    never occurs gets level 0). ``literal`` divides both sums by the total number
    of samples instead, which drags the ON level toward zero for sparse devices.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown reconstruction mode {mode!r}")
    p, s = _arrays(power, status)
    if mode == "literal":
        n = p.size
        on_sum, off_sum = float(np.dot(s, p)), float(np.dot(1 - s, p))
        levels = OnOffLevels(on_sum / n if n else 0.0, off_sum / n if n else 0.0)
    else:
        levels = OnOffLevels(_shifted_mean(p[s == 1]), _shifted_mean(p[s == 0]))
    both_states = 0 < s.sum() < s.size
    if both_states and levels.p_on < levels.p_off:
        warnings.warn(f"ON level {levels.p_on:.3f} W is below OFF level {levels.p_off:.3f} W", RuntimeWarning)
    return levels


def reconstruct_binary(status, levels: OnOffLevels, label: str = "reconstructed", sampling=None):
    """Substitute each status sample by its level; returns a PowerSeries when given a StatusSeries."""
    s = status.values if isinstance(status, StatusSeries) else np.asarray(status)
    out = np.where(s == 1, levels.p_on, levels.p_off).astype(np.float64)
    if isinstance(status, StatusSeries):
        return PowerSeries(out, status.sampling, label)
    return out


def intrinsic_error(power, status, mode: str = "conditional") -> float:
    p, s = _arrays(power, status)
    levels = compute_levels(p, s, mode)
    return float(np.mean(np.abs(p - reconstruct_binary(s, levels))))


def reconstruction_record(appliance: str, method: str, levels: OnOffLevels, error: float) -> dict:
    return {
        "appliance": appliance,
        "method": method,
        "p_on": levels.p_on,
        "p_off": levels.p_off,
        "intrinsic_error_watts": error,
    }
