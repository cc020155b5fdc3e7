"""Central finite-difference check of the analytic gradient.

The network is piecewise smooth: a perturbation that flips any ReLU or max-pool
decision straddles a kink, where a central difference does not estimate the
derivative. Such probes are detected by comparing branch patterns at +h and -h
with the unperturbed pass and are redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossWeights
from .network import ModelParams, _run, backward, batch_loss


@dataclass(frozen=True)
class Probe:
    name: str
    index: tuple
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale == 0 else abs(self.analytic - self.numeric) / scale


def _branch_pattern(params, x):
    _, _, tape = _run(params, x, True, update_stats=False)
    masks = [v for k, v in tape.items() if k.endswith(".relu")]
    masks += [v[1] for k, v in tape.items() if k.startswith("enc") and k.endswith(".pool")]
    return masks


def gradient_check(
    params: ModelParams,
    inputs,
    targets,
    weights: LossWeights,
    n_probes: int = 20,
    step: float = 1e-4,
    seed: int = 0,
    names=None,
    max_draws: int = 1000,
) -> tuple[list[Probe], int]:
    """Compare analytic and numeric partial derivatives at random coordinates.

    Returns the accepted probes and the number of draws rejected for straddling a kink.
    ``params`` is restored exactly after every perturbation.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, None, :]
    _, grads, _ = backward(params, x, targets, weights)
    rng = np.random.default_rng(seed)
    names = list(names or params.weights)
    base = _branch_pattern(params, x)
    probes, rejected = [], 0
    for _ in range(max_draws):
        if len(probes) == n_probes:
            break
        name = names[int(rng.integers(len(names)))]
        arr = params.weights[name]
        index = tuple(int(rng.integers(s)) for s in arr.shape)
        old = arr[index]
        values, kink = [], False
        for delta in (step, -step):
            arr[index] = old + delta
            kink = kink or any(np.any(a != b) for a, b in zip(base, _branch_pattern(params, x)))
            values.append(batch_loss(params, x, targets, weights))
        arr[index] = old
        if kink:
            rejected += 1
            continue
        numeric = (values[0] - values[1]) / (2 * step)
        probes.append(Probe(name, index, float(grads[name][index]), float(numeric)))
    return probes, rejected
