import math

import numpy as np
import pytest

from nilm_threshold.errors import ConfigurationError, InputError, NumericalError
from nilm_threshold.model import (
    POWER_HEAD,
    STATUS_HEAD,
    Architecture,
    LossWeights,
    Mode,
    TrainingSet,
    adam_step,
    backward,
    batch_loss,
    build_conv_model,
    forward,
    load_checkpoint,
    loss_classification,
    loss_regression,
    loss_total,
    predict,
    save_checkpoint,
    train,
)
from nilm_threshold.model.checkpoint import from_bytes, to_bytes
from nilm_threshold.model.gradcheck import gradient_check


@pytest.fixture(scope="module")
def small():
    return build_conv_model(0.125, seed=1)


def batch(n=3, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 510)) * 0.3
    status = (rng.random((n, 480)) > 0.6).astype(float)
    power = status * 0.05 + 0.002 * rng.random((n, 480))
    return x, status, power


def test_full_width_ladder():
    arch = Architecture.scaled(1.0)
    assert arch.encoder_channels == (32, 64, 128, 256)
    assert arch.encoder_lengths() == [508, 252, 124, 60]
    assert (arch.pool_channels, arch.decoder_channels) == (64, 32)


def test_quarter_width_ladder():
    arch = Architecture.scaled(0.25)
    assert arch.encoder_channels == (8, 16, 32, 64)
    assert arch.encoder_lengths() == [508, 252, 124, 60]
    heads = {s.name: s for s in arch.layers()}
    assert heads["status"].out_length == heads["power"].out_length == 480
    assert heads["dec.upconv"].in_channels == 64 + 4 * 16


def test_width_scale_validation():
    with pytest.raises(ConfigurationError):
        Architecture.scaled(0)
    with pytest.raises(ConfigurationError):
        Architecture.scaled(0.01)


def test_parameter_count_quarter_width():
    p = build_conv_model(0.25)
    arch = p.arch
    enc = 8 * 1 * 3 + 16 * 8 * 3 + 32 * 16 * 3 + 64 * 32 * 3 + 2 * (8 + 16 + 32 + 64)
    tp = 4 * (16 * 64 + 2 * 16)
    dec = arch.concat_channels * 8 * 8 + 2 * 8
    heads = 2 * 8 + 2 + 8 + 1
    assert p.n_parameters() == enc + tp + dec + heads


def test_init_bounds_and_determinism():
    a = build_conv_model(0.125, seed=4)
    b = build_conv_model(0.125, seed=4)
    c = build_conv_model(0.125, seed=5)
    for name in a.weights:
        assert np.array_equal(a.weights[name], b.weights[name])
    assert not np.array_equal(a.weights["enc0.conv.weight"], c.weights["enc0.conv.weight"])
    assert np.abs(a.weights["enc1.conv.weight"]).max() <= 1 / math.sqrt(4 * 3)
    assert np.all(a.weights["enc0.bn.gamma"] == 1) and np.all(a.buffers["enc0.bn.running_var"] == 1)


@pytest.mark.parametrize("scale", [0.125, 0.25, 1.0])
def test_zero_input_eval(scale):
    p = build_conv_model(scale)
    probs, power = forward(p, np.zeros(510), Mode.EVAL)
    assert probs.shape == (2, 480) and power.shape == (1, 480)
    assert np.isfinite(probs).all() and np.isfinite(power).all()
    assert np.allclose(probs.sum(axis=0), 1.0)


def test_batch_shapes_and_identical_inputs(small):
    x = np.random.default_rng(0).standard_normal(510)
    probs, power = forward(small, np.stack([x, x]))
    assert probs.shape == (2, 2, 480) and power.shape == (2, 1, 480)
    assert np.array_equal(probs[0], probs[1]) and np.array_equal(power[0], power[1])
    with pytest.raises(InputError):
        forward(small, np.zeros(500))
    with pytest.raises(InputError):
        forward(small, np.full(510, np.nan))


def test_train_mode_updates_running_stats():
    p = build_conv_model(0.125)
    before = p.buffers["enc0.bn.running_mean"].copy()
    forward(p, batch()[0], Mode.TRAIN)
    assert not np.array_equal(before, p.buffers["enc0.bn.running_mean"])
    frozen = p.copy()
    forward(p, batch()[0], Mode.EVAL)
    assert all(np.array_equal(p.buffers[k], frozen.buffers[k]) for k in p.buffers)


def test_power_head_linearity(small):
    x = batch()[0]
    probs, power = forward(small, x)
    doubled = small.copy()
    for name in POWER_HEAD:
        doubled.weights[name] *= 2
    probs2, power2 = forward(doubled, x)
    assert np.allclose(power2, 2 * power, rtol=1e-12, atol=1e-15)
    assert np.array_equal(probs, probs2)


def test_nonfinite_parameters_raise_numerical_error():
    p = build_conv_model(0.125)
    p.weights["enc1.conv.weight"][0, 0, 0] = np.inf
    with pytest.raises(NumericalError, match="layer"):
        forward(p, batch()[0])


def test_loss_examples():
    assert loss_regression(np.zeros(5), np.zeros(5)) == 0
    assert loss_regression(np.full(480, 0.1), np.zeros(480)) == pytest.approx(0.01)
    assert loss_regression([0, 1], [1, 0]) == 1.0
    assert loss_classification([1.0, 0.0], [1, 0]) <= 1.2e-7
    assert loss_classification(np.full(4, 0.5), [1, 0, 1, 0]) == pytest.approx(math.log(2))
    assert loss_classification([0.25], [1]) == pytest.approx(-math.log(0.25))
    assert loss_total(0.6, 0.0066, LossWeights(1.0)) == 0.6
    assert loss_total(0.6, 0.0066, LossWeights(0.0)) == pytest.approx(1.0)
    assert loss_total(0.6, 0.0066, LossWeights(0.5)) == pytest.approx(0.8)
    with pytest.raises(ConfigurationError):
        LossWeights(1.5)
    with pytest.raises(ConfigurationError):
        LossWeights(0.5, 0)


@pytest.mark.parametrize("w,frozen", [(1.0, POWER_HEAD), (0.0, STATUS_HEAD)])
def test_unweighted_head_has_zero_gradient(small, w, frozen):
    x, s, pw = batch()
    _, grads, _ = backward(small, x, (s, pw), LossWeights(w))
    for name in frozen:
        assert not grads[name].any()


def test_backward_loss_matches_batch_loss(small):
    x, s, pw = batch()
    p = small.copy()
    loss, grads, parts = backward(p, x, (s, pw), LossWeights(0.3))
    assert loss == pytest.approx(batch_loss(p, x, (s, pw), LossWeights(0.3)), rel=1e-12)
    assert set(grads) == set(p.weights)
    assert loss == pytest.approx(0.3 * parts["class_loss"] + 0.7 * parts["reg_loss"] / 0.0066)


@pytest.mark.parametrize("w", [0.0, 0.5, 1.0])
def test_gradient_check(small, w):
    x, s, pw = batch(2, seed=int(w * 10))
    params = small.copy()
    probes, _ = gradient_check(params, x, (s, pw), LossWeights(w), n_probes=8, seed=3)
    assert len(probes) == 8
    assert max(p.rel_error for p in probes) < 1e-3
    for name in params.weights:
        assert np.array_equal(params.weights[name], small.weights[name])


def test_adam_zero_gradient_keeps_parameters():
    p = build_conv_model(0.125)
    before = p.copy()
    zeros = {k: np.zeros_like(v) for k, v in p.weights.items()}
    adam_step(p, zeros, lr=1e-3)
    assert p.step == 1
    for k in p.weights:
        assert np.array_equal(p.weights[k], before.weights[k])


def test_adam_first_step_is_unit_step():
    p = build_conv_model(0.125)
    before = p.copy()
    rng = np.random.default_rng(0)
    grads = {k: rng.standard_normal(v.shape) for k, v in p.weights.items()}
    adam_step(p, grads, lr=1e-3)
    for k in p.weights:
        delta = p.weights[k] - before.weights[k]
        assert np.allclose(np.abs(delta), 1e-3, rtol=1e-4)
        assert np.all(np.sign(delta) == -np.sign(grads[k]))
        assert np.allclose(p.adam_m[k], 0.1 * grads[k])
    adam_step(p, {k: np.zeros_like(v) for k, v in p.weights.items()}, lr=1e-3)
    assert np.allclose(p.adam_m["enc0.conv.weight"], 0.09 * grads["enc0.conv.weight"])


def toy_set(n=12, seed=0):
    rng = np.random.default_rng(seed)
    status = np.zeros((n, 480))
    for i in range(n):
        a = int(rng.integers(0, 400))
        status[i, a : a + 60] = 1
    inputs = np.zeros((n, 510))
    inputs[:, 15:495] = status * 0.05 + 0.002 * rng.standard_normal((n, 480))
    inputs -= inputs.mean(axis=1, keepdims=True)
    return TrainingSet(inputs, status, status * 0.05)


def test_training_reduces_loss_and_is_deterministic():
    params = build_conv_model(0.125, seed=0)
    data = toy_set()
    a = train(params, data, None, LossWeights(0.5), epochs=6, batch_size=4, lr=1e-3, seed=2)
    b = train(params, data, None, LossWeights(0.5), epochs=6, batch_size=4, lr=1e-3, seed=2)
    assert a.history[0].train_loss > a.history[-1].train_loss
    assert [e.train_loss for e in a.history] == [e.train_loss for e in b.history]
    for k in a.params.weights:
        assert np.array_equal(a.params.weights[k], b.params.weights[k])
    assert params.step == 0


def test_zero_epochs_returns_initialization():
    params = build_conv_model(0.125, seed=0)
    result = train(params, toy_set(4), toy_set(2, 1), LossWeights(1.0), epochs=0)
    assert result.history == [] and result.best_epoch == 0
    for k in params.weights:
        assert np.array_equal(result.params.weights[k], params.weights[k])


def test_training_validates_inputs():
    params = build_conv_model(0.125)
    with pytest.raises(InputError):
        train(params, TrainingSet(np.zeros((0, 510)), np.zeros((0, 480)), np.zeros((0, 480))), None, LossWeights())
    with pytest.raises(InputError):
        TrainingSet(np.zeros((2, 510)), np.zeros((1, 480)), np.zeros((2, 480)))


def test_best_validation_snapshot():
    params = build_conv_model(0.125, seed=0)
    result = train(params, toy_set(8), toy_set(4, 1), LossWeights(1.0), epochs=4, batch_size=4, lr=1e-3, seed=0)
    losses = [e.val_loss for e in result.history]
    assert result.best_epoch == int(np.argmin(losses)) + 1
    prob, _ = predict(result.params, toy_set(4, 1).inputs)
    assert prob.shape == (4, 480)


def test_checkpoint_round_trip(tmp_path):
    params = build_conv_model(0.125, seed=3)
    x, s, pw = batch()
    _, grads, _ = backward(params, x, (s, pw), LossWeights(0.5), update_stats=True)
    adam_step(params, grads)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, params, {"appliance": "fridge"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"appliance": "fridge"}
    assert loaded.step == 1 and loaded.arch == params.arch
    for group in ("weights", "buffers", "adam_m", "adam_v"):
        for k, v in getattr(params, group).items():
            assert np.array_equal(getattr(loaded, group)[k], v)
    assert to_bytes(loaded, extra) == path.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    with pytest.raises(InputError):
        from_bytes(b"not a checkpoint at all")
    blob = to_bytes(build_conv_model(0.125))
    with pytest.raises(InputError):
        from_bytes(blob[:-8])
    with pytest.raises(InputError):
        load_checkpoint(tmp_path / "missing.ckpt")
