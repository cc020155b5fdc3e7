"""Bias-corrected Adam."""

from __future__ import annotations

import numpy as np

from .network import ModelParams


def adam_step(params: ModelParams, grads: dict, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ModelParams:
    """Apply one Adam update in place and return ``params``.

    Every learnable array must have a gradient; the step counter is incremented.
    """
    params.step += 1
    t = params.step
    c1 = 1 - beta1**t
    c2 = 1 - beta2**t
    for name, w in params.weights.items():
        g = grads[name]
        m = params.adam_m[name]
        v = params.adam_v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        w -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params
