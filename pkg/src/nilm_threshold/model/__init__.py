"""Trainable dual-head convolutional disaggregator implemented on numpy."""

from .checkpoint import load_checkpoint, save_checkpoint
from .losses import LossWeights, loss_classification, loss_regression, loss_total
from .network import (
    POWER_HEAD,
    STATUS_HEAD,
    Architecture,
    LayerKind,
    LayerSpec,
    Mode,
    ModelParams,
    backward,
    batch_loss,
    build_conv_model,
    forward,
)
from .optim import adam_step
from .train import EpochRecord, TrainingSet, TrainResult, predict, train

__all__ = [
    "Architecture",
    "EpochRecord",
    "LayerKind",
    "LayerSpec",
    "LossWeights",
    "Mode",
    "ModelParams",
    "POWER_HEAD",
    "STATUS_HEAD",
    "TrainResult",
    "TrainingSet",
    "adam_step",
    "backward",
    "batch_loss",
    "build_conv_model",
    "forward",
    "load_checkpoint",
    "loss_classification",
    "loss_regression",
    "loss_total",
    "predict",
    "save_checkpoint",
    "train",
]
