"""Regression, classification and weighted total losses, with their output gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

PROB_EPS = 1e-7
DEFAULT_K = 0.0066


@dataclass(frozen=True)
class LossWeights:
    """``w`` weights the classification loss; the regression loss is divided by ``k``."""

    w: float = 1.0
    k: float = DEFAULT_K

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ConfigurationError(f"loss weight w must lie in [0, 1], got {self.w}")
        if not self.k > 0:
            raise ConfigurationError(f"loss scale k must be positive, got {self.k}")


def loss_regression(pred_power, target_power) -> float:
    diff = np.asarray(pred_power, dtype=np.float64) - np.asarray(target_power, dtype=np.float64)
    return float(np.mean(diff * diff))


def loss_classification(pred_prob_on, target_status) -> float:
    p = np.clip(np.asarray(pred_prob_on, dtype=np.float64), PROB_EPS, 1 - PROB_EPS)
    y = np.asarray(target_status, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def loss_total(class_loss: float, reg_loss: float, weights: LossWeights) -> float:
    return weights.w * class_loss + (1 - weights.w) * reg_loss / weights.k


def grad_regression(pred_power, target_power) -> np.ndarray:
    return 2.0 * (pred_power - target_power) / pred_power.size


def grad_classification(pred_prob_on, target_status) -> np.ndarray:
    """d(BCE)/dp, zero where the probability is clipped."""
    p = pred_prob_on
    inside = (p > PROB_EPS) & (p < 1 - PROB_EPS)
    pc = np.clip(p, PROB_EPS, 1 - PROB_EPS)
    y = target_status
    return inside * (-(y / pc) + (1 - y) / (1 - pc)) / p.size
