"""Mini-batch training with best-validation snapshotting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..metrics import classification_scores, mae
from .losses import LossWeights, loss_classification, loss_regression, loss_total
from .network import Mode, ModelParams, _run, backward
from .optim import adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainingSet:
    """Stacked windows: inputs (N, 510), binary status (N, 480), normalized power (N, 480)."""

    inputs: np.ndarray
    status: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.status = np.asarray(self.status, dtype=np.float64)
        self.power = np.asarray(self.power, dtype=np.float64)
        n = len(self.inputs)
        if len(self.status) != n or len(self.power) != n:
            raise InputError("inputs and targets have different numbers of windows")

    def __len__(self):
        return len(self.inputs)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float
    val_mae_watts: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0


def predict(params: ModelParams, inputs, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode predictions: P(ON) and normalized power, each (N, 480)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    probs, power = [], []
    for i in range(0, len(inputs), batch_size):
        p, w, _ = _run(params, inputs[i : i + batch_size, None, :], train=False)
        probs.append(p[:, 1, :])
        power.append(w[:, 0, :])
    if not probs:
        return np.zeros((0, 480)), np.zeros((0, 480))
    return np.concatenate(probs), np.concatenate(power)


def evaluate_loss(params: ModelParams, data: TrainingSet, weights: LossWeights, batch_size: int = 64):
    prob, power = predict(params, data.inputs, batch_size)
    loss = loss_total(loss_classification(prob, data.status), loss_regression(power, data.power), weights)
    return loss, prob, power


def train(
    params: ModelParams,
    train_set: TrainingSet,
    val_set: TrainingSet | None,
    weights: LossWeights,
    epochs: int = 50,
    batch_size: int = 32,
    lr: float = 1e-4,
    seed: int = 0,
    reference_watts: float = 2000.0,
) -> TrainResult:
    """Train ``params`` (a copy is made) and return the snapshot with the lowest validation loss.

    Each epoch reshuffles the training windows with a generator seeded by ``seed``.
    Without a validation set the training loss selects the snapshot instead.
    """
    if len(train_set) == 0:
        raise InputError("empty training set")
    if batch_size < 1 or epochs < 0:
        raise InputError("batch size must be >= 1 and epochs >= 0")
    params = params.copy()
    best = params.copy()
    best_loss = np.inf
    best_epoch = 0
    rng = np.random.default_rng(seed)
    history = []
    n = len(train_set)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, batch_size):
            idx = order[i : i + batch_size]
            loss, grads, _ = backward(
                params, train_set.inputs[idx], (train_set.status[idx], train_set.power[idx]), weights, update_stats=True
            )
            adam_step(params, grads, lr)
            total += loss * len(idx)
        train_loss = total / n
        if val_set is not None and len(val_set):
            val_loss, prob, power = evaluate_loss(params, val_set, weights)
            val_f1 = classification_scores(prob, val_set.status)["f1"]
            val_mae = mae(power, val_set.power, reference_watts)
        else:
            val_loss, val_f1, val_mae = train_loss, float("nan"), float("nan")
        history.append(EpochRecord(epoch, float(train_loss), float(val_loss), float(val_f1), float(val_mae)))
        log.debug("epoch %d train %.5f val %.5f f1 %.3f mae %.2f", epoch, train_loss, val_loss, val_f1, val_mae)
        if val_loss < best_loss:
            best_loss, best_epoch = val_loss, epoch
            best = params.copy()
    return TrainResult(best, history, best_epoch)
