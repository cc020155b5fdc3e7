"""Dual-head convolutional disaggregator (encoder, temporal pooling, decoder, status/power heads)."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, InputError, NumericalError
from ..series import INPUT_LENGTH, OUTPUT_LENGTH
from . import layers as L
from .losses import (
    LossWeights,
    grad_classification,
    grad_regression,
    loss_classification,
    loss_regression,
    loss_total,
)

BASE_ENCODER = (32, 64, 128, 256)
BASE_POOL = 64
BASE_DECODER = 32
POOL_SIZES = (5, 10, 20, 30)
ENCODER_KERNEL = 3
DECODER_KERNEL = 8
POWER_HEAD = ("power.weight", "power.bias")
STATUS_HEAD = ("status.weight", "status.bias")


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


class LayerKind(str, enum.Enum):
    CONV = "Conv"
    RELU = "ReLU"
    MAXPOOL = "MaxPool"
    AVGPOOL = "AvgPool"
    BATCHNORM = "BatchNorm"
    UPSAMPLE = "Upsample"
    CONCAT = "Concat"
    POINTWISE = "PointwiseConv"
    UPCONV = "UpConv"
    SOFTMAX = "Softmax"
    LINEAR = "Linear"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: LayerKind
    kernel: int = 1
    stride: int = 1
    in_channels: int = 0
    out_channels: int = 0
    out_length: int = 0
    padding: int = 0


@dataclass(frozen=True)
class Architecture:
    width_scale: float
    encoder_channels: tuple[int, ...]
    pool_channels: int
    decoder_channels: int

    @classmethod
    def scaled(cls, width_scale: float) -> Architecture:
        if not 0 < width_scale <= 1:
            raise ConfigurationError(f"width_scale must lie in (0, 1], got {width_scale}")
        enc = tuple(int(round(width_scale * c)) for c in BASE_ENCODER)
        pool = int(round(width_scale * BASE_POOL))
        dec = int(round(width_scale * BASE_DECODER))
        if min(enc + (pool, dec)) < 1:
            raise ConfigurationError(f"width_scale {width_scale} leaves a layer with zero channels")
        return cls(float(width_scale), enc, pool, dec)

    @property
    def concat_channels(self) -> int:
        return self.encoder_channels[-1] + len(POOL_SIZES) * self.pool_channels

    def layers(self) -> list[LayerSpec]:
        """Flat description of every layer with its output length."""
        specs = []
        length, c_in = INPUT_LENGTH, 1
        for i, c in enumerate(self.encoder_channels):
            length -= ENCODER_KERNEL - 1
            specs += [
                LayerSpec(f"enc{i}.conv", LayerKind.CONV, ENCODER_KERNEL, 1, c_in, c, length),
                LayerSpec(f"enc{i}.bn", LayerKind.BATCHNORM, in_channels=c, out_channels=c, out_length=length),
                LayerSpec(f"enc{i}.relu", LayerKind.RELU, in_channels=c, out_channels=c, out_length=length),
            ]
            if i < len(self.encoder_channels) - 1:
                length //= 2
                specs.append(LayerSpec(f"enc{i}.pool", LayerKind.MAXPOOL, 2, 2, c, c, length))
            c_in = c
        enc_len = length
        for size in POOL_SIZES:
            p = self.pool_channels
            specs += [
                LayerSpec(f"tp{size}.pool", LayerKind.AVGPOOL, size, size, c_in, c_in, enc_len // size),
                LayerSpec(f"tp{size}.conv", LayerKind.POINTWISE, 1, 1, c_in, p, enc_len // size),
                LayerSpec(f"tp{size}.bn", LayerKind.BATCHNORM, in_channels=p, out_channels=p, out_length=enc_len // size),
                LayerSpec(f"tp{size}.relu", LayerKind.RELU, in_channels=p, out_channels=p, out_length=enc_len // size),
                LayerSpec(f"tp{size}.up", LayerKind.UPSAMPLE, size, size, p, p, enc_len),
            ]
        cc, dc = self.concat_channels, self.decoder_channels
        out_len = enc_len * DECODER_KERNEL
        specs += [
            LayerSpec("concat", LayerKind.CONCAT, in_channels=cc, out_channels=cc, out_length=enc_len),
            LayerSpec("dec.upconv", LayerKind.UPCONV, DECODER_KERNEL, DECODER_KERNEL, cc, dc, out_len),
            LayerSpec("dec.bn", LayerKind.BATCHNORM, in_channels=dc, out_channels=dc, out_length=out_len),
            LayerSpec("status", LayerKind.POINTWISE, 1, 1, dc, 2, out_len),
            LayerSpec("status.softmax", LayerKind.SOFTMAX, in_channels=2, out_channels=2, out_length=out_len),
            LayerSpec("power", LayerKind.POINTWISE, 1, 1, dc, 1, out_len),
        ]
        return specs

    def encoder_lengths(self) -> list[int]:
        return [s.out_length for s in self.layers() if s.kind is LayerKind.CONV and s.name.startswith("enc")]


@dataclass
class ModelParams:
    """Learnable arrays, batch-norm running statistics and Adam state."""

    arch: Architecture
    weights: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        for name, w in self.weights.items():
            self.adam_m.setdefault(name, np.zeros_like(w))
            self.adam_v.setdefault(name, np.zeros_like(w))

    def copy(self) -> ModelParams:
        return copy.deepcopy(self)

    def n_parameters(self) -> int:
        return int(sum(w.size for w in self.weights.values()))


def build_conv_model(width_scale: float = 0.25, seed: int = 0) -> ModelParams:
    """Fresh parameters; weights uniform in +-1/sqrt(fan_in), BN scale 1 and shift 0.

    Convolutions feeding a batch norm carry no bias (the norm's shift absorbs it).
    """
    arch = Architecture.scaled(width_scale)
    rng = np.random.default_rng(seed)
    weights, buffers = {}, {}

    def uniform(name, shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        weights[name] = rng.uniform(-bound, bound, size=shape)

    def bn(name, c):
        weights[f"{name}.gamma"] = np.ones(c)
        weights[f"{name}.beta"] = np.zeros(c)
        buffers[f"{name}.running_mean"] = np.zeros(c)
        buffers[f"{name}.running_var"] = np.ones(c)

    c_in = 1
    for i, c in enumerate(arch.encoder_channels):
        uniform(f"enc{i}.conv.weight", (c, c_in, ENCODER_KERNEL), c_in * ENCODER_KERNEL)
        bn(f"enc{i}.bn", c)
        c_in = c
    for size in POOL_SIZES:
        uniform(f"tp{size}.conv.weight", (arch.pool_channels, c_in, 1), c_in)
        bn(f"tp{size}.bn", arch.pool_channels)
    cc, dc = arch.concat_channels, arch.decoder_channels
    uniform("dec.upconv.weight", (cc, dc, DECODER_KERNEL), cc)
    bn("dec.bn", dc)
    uniform("status.weight", (2, dc, 1), dc)
    uniform("status.bias", (2,), dc)
    uniform("power.weight", (1, dc, 1), dc)
    uniform("power.bias", (1,), dc)
    return ModelParams(arch, weights, buffers)


def _check(h, index, name):
    # a finite sum proves every entry finite; only a non-finite sum needs the full scan
    if not np.isfinite(h.sum()) and not np.all(np.isfinite(h)):
        raise NumericalError(f"non-finite activation at layer {index} ({name})")
    return h


def _run(params: ModelParams, x: np.ndarray, train: bool, update_stats: bool = True):
    """Forward pass over a (B, 1, 510) batch. Returns ``(status_probs, power, tape)``."""
    W, buf = params.weights, params.buffers
    tape = {}
    idx = 0

    def bn(name, h):
        out, cache = L.batchnorm_forward(
            h, W[f"{name}.gamma"], W[f"{name}.beta"],
            buf[f"{name}.running_mean"], buf[f"{name}.running_var"], train, update_stats,
        )
        tape[name] = cache
        return out

    h = x
    n_enc = len(params.arch.encoder_channels)
    for i in range(n_enc):
        h, tape[f"enc{i}.conv"] = L.conv1d_forward(h, W[f"enc{i}.conv.weight"])
        h = bn(f"enc{i}.bn", h)
        h, tape[f"enc{i}.relu"] = L.relu_forward(h)
        if i < n_enc - 1:
            h, tape[f"enc{i}.pool"] = L.maxpool_forward(h, 2)
        idx += 1
        _check(h, idx, f"enc{i}")
    branches = [h]
    for size in POOL_SIZES:
        p, tape[f"tp{size}.pool"] = L.avgpool_forward(h, size)
        p, tape[f"tp{size}.conv"] = L.conv1d_forward(p, W[f"tp{size}.conv.weight"])
        p = bn(f"tp{size}.bn", p)
        p, tape[f"tp{size}.relu"] = L.relu_forward(p)
        branches.append(L.upsample_forward(p, size))
        idx += 1
        _check(branches[-1], idx, f"tp{size}")
    h = np.concatenate(branches, axis=1)
    tape["concat"] = [b.shape[1] for b in branches]
    h, tape["dec.upconv"] = L.upconv_forward(h, W["dec.upconv.weight"])
    h = bn("dec.bn", h)
    idx += 1
    _check(h, idx, "dec")
    logits, tape["status"] = L.conv1d_forward(h, W["status.weight"], W["status.bias"])
    probs = L.softmax_forward(logits)
    power, tape["power"] = L.conv1d_forward(h, W["power.weight"], W["power.bias"])
    idx += 1
    _check(probs, idx, "status")
    _check(power, idx + 1, "power")
    tape["probs"] = probs
    return probs, power, tape


def forward(params: ModelParams, input, mode: Mode | str = Mode.EVAL):
    """Run the model on one window (shape (510,)) or a batch (shape (B, 510) or (B, 1, 510)).

    Returns ``(status_probs, power)`` shaped (2, 480)/(1, 480) for a single window,
    (B, 2, 480)/(B, 1, 480) for a batch. Training mode normalizes with batch
    statistics and updates the running averages in ``params``.
    """
    mode = Mode(mode)
    x = np.asarray(input, dtype=np.float64)
    single = x.ndim == 1
    if x.ndim == 1:
        x = x[None, None, :]
    elif x.ndim == 2:
        x = x[:, None, :]
    if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != INPUT_LENGTH:
        raise InputError(f"model input must be (510,), (B, 510) or (B, 1, 510); got {np.shape(input)}")
    if not np.all(np.isfinite(x)):
        raise InputError("model input contains non-finite values")
    probs, power, _ = _run(params, x, mode is Mode.TRAIN)
    if single:
        return probs[0], power[0]
    return probs, power


def _layer_backward_bn(name, dh, tape, grads):
    dh, grads[f"{name}.gamma"], grads[f"{name}.beta"] = L.batchnorm_backward(dh, tape[name])
    return dh


def backward(params: ModelParams, input, targets, weights: LossWeights, update_stats: bool = False):
    """Loss and gradient of the weighted total loss for a batch.

    ``targets`` is ``(status, power)``, each (B, 480), power in normalized units.
    Returns ``(loss, grads, parts)`` where ``parts`` holds the two component losses.
    A head whose loss weight is zero receives an exactly-zero gradient.
    """
    x = np.asarray(input, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, None, :]
    status_t = np.asarray(targets[0], dtype=np.float64).reshape(x.shape[0], OUTPUT_LENGTH)
    power_t = np.asarray(targets[1], dtype=np.float64).reshape(x.shape[0], OUTPUT_LENGTH)
    probs, power, tape = _run(params, x, True, update_stats)
    p_on = probs[:, 1, :]
    pred = power[:, 0, :]
    c_loss = loss_classification(p_on, status_t)
    r_loss = loss_regression(pred, power_t)
    loss = loss_total(c_loss, r_loss, weights)

    W = params.weights
    grads = {}
    c_coef = weights.w
    r_coef = (1 - weights.w) / weights.k
    if c_coef:
        dprobs = np.zeros_like(probs)
        dprobs[:, 1, :] = c_coef * grad_classification(p_on, status_t)
        dlogits = L.softmax_backward(dprobs, probs)
        dh_status, grads["status.weight"], grads["status.bias"] = L.conv1d_backward(dlogits, tape["status"])
    else:
        dh_status = 0.0
        grads["status.weight"] = np.zeros_like(W["status.weight"])
        grads["status.bias"] = np.zeros_like(W["status.bias"])
    if r_coef:
        dpower = (r_coef * grad_regression(pred, power_t))[:, None, :]
        dh_power, grads["power.weight"], grads["power.bias"] = L.conv1d_backward(dpower, tape["power"])
    else:
        dh_power = 0.0
        grads["power.weight"] = np.zeros_like(W["power.weight"])
        grads["power.bias"] = np.zeros_like(W["power.bias"])
    dh = dh_status + dh_power
    dh = _layer_backward_bn("dec.bn", dh, tape, grads)
    dh, grads["dec.upconv.weight"] = L.upconv_backward(dh, tape["dec.upconv"])
    splits = np.cumsum(tape["concat"])[:-1]
    d_branches = np.split(dh, splits, axis=1)
    denc = d_branches[0]
    for size, dp in zip(POOL_SIZES, d_branches[1:]):
        dp = L.upsample_backward(dp, size)
        dp = L.relu_backward(dp, tape[f"tp{size}.relu"])
        dp = _layer_backward_bn(f"tp{size}.bn", dp, tape, grads)
        dp, grads[f"tp{size}.conv.weight"], _ = L.conv1d_backward(dp, tape[f"tp{size}.conv"])
        denc = denc + L.avgpool_backward(dp, tape[f"tp{size}.pool"])
    dh = denc
    n_enc = len(params.arch.encoder_channels)
    for i in reversed(range(n_enc)):
        if i < n_enc - 1:
            dh = L.maxpool_backward(dh, tape[f"enc{i}.pool"])
        dh = L.relu_backward(dh, tape[f"enc{i}.relu"])
        dh = _layer_backward_bn(f"enc{i}.bn", dh, tape, grads)
        dh, grads[f"enc{i}.conv.weight"], _ = L.conv1d_backward(dh, tape[f"enc{i}.conv"], need_dx=i > 0)
    for name, g in grads.items():
        if not np.isfinite(g.sum()) and not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name}")
    return loss, grads, {"class_loss": c_loss, "reg_loss": r_loss}


def batch_loss(params: ModelParams, input, targets, weights: LossWeights, mode: Mode | str = Mode.TRAIN) -> float:
    """Total loss without gradients (training mode leaves running statistics untouched)."""
    x = np.asarray(input, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, None, :]
    probs, power, _ = _run(params, x, Mode(mode) is Mode.TRAIN, update_stats=False)
    c = loss_classification(probs[:, 1, :], targets[0])
    r = loss_regression(power[:, 0, :], targets[1])
    return loss_total(c, r, weights)
