"""Forward/backward pairs for the 1-D layers of the disaggregator.

Tensors are float64 arrays shaped (batch, channels, length). Every ``*_forward``
returns ``(out, cache)`` and the matching ``*_backward`` consumes the cache.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _channel_sum(a):
    """Sum over batch and time of a (B, C, L) array; the two-stage order is much faster in numpy."""
    return a.sum(axis=2).sum(axis=0)


def conv1d_forward(x, weight, bias=None, stride=1):
    """Valid (unpadded) cross-correlation; ``weight`` is (out, in, kernel)."""
    k = weight.shape[2]
    if k == 1 and stride == 1:
        out = np.matmul(weight[:, :, 0], x)
        cols = x
    else:
        cols = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]  # (B, Ci, Lo, K)
        out = np.ascontiguousarray(np.tensordot(cols, weight, axes=([1, 3], [1, 2])).transpose(0, 2, 1))
    if bias is not None:
        out += bias[None, :, None]
    return out, (x.shape, cols, weight, stride, bias is not None)


def conv1d_backward(dout, cache, need_dx=True):
    """Gradients ``(dx, dweight, dbias)``; ``dx`` is None when ``need_dx`` is false."""
    x_shape, cols, weight, stride, has_bias = cache
    k = weight.shape[2]
    lo = dout.shape[2]
    dbias = _channel_sum(dout) if has_bias else None
    if k == 1 and stride == 1:
        dweight = np.einsum("bol,bil->oi", dout, cols, optimize=True)[:, :, None]
        dx = np.matmul(weight[:, :, 0].T, dout) if need_dx else None
        return dx, dweight, dbias
    dweight = np.tensordot(dout, cols, axes=([0, 2], [0, 2]))
    if not need_dx:
        return None, dweight, dbias
    dcols = np.tensordot(dout, weight, axes=([1], [0]))  # (B, Lo, Ci, K)
    dx = np.zeros(x_shape)
    for j in range(k):
        dx[:, :, j : j + (lo - 1) * stride + 1 : stride] += dcols[:, :, :, j].transpose(0, 2, 1)
    return dx, dweight, dbias


def upconv_forward(x, weight):
    """Transposed convolution whose kernel equals its stride; ``weight`` is (in, out, kernel)."""
    b, _, t = x.shape
    _, co, k = weight.shape
    out = np.tensordot(x, weight, axes=([1], [0]))  # (B, T, Co, K)
    out = out.transpose(0, 2, 1, 3).reshape(b, co, t * k)
    return out, (x, weight)


def upconv_backward(dout, cache):
    x, weight = cache
    b, _, t = x.shape
    _, co, k = weight.shape
    d = dout.reshape(b, co, t, k)
    dweight = np.tensordot(x, d, axes=([0, 2], [0, 2]))  # (Ci, Co, K)
    dx = np.tensordot(d, weight, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    return np.ascontiguousarray(dx), dweight


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train, update_stats=True):
    """Per-channel normalization over batch and time.

    In training mode batch statistics are used and, when ``update_stats`` is set,
    the running buffers are updated in place (unbiased variance, momentum 0.1).
    """
    if train:
        n = x.shape[0] * x.shape[2]
        mean = _channel_sum(x) / n
        xc = x - mean[None, :, None]
        var = _channel_sum(xc * xc) / n
        if update_stats:
            unbiased = var * n / (n - 1) if n > 1 else var
            running_mean *= 1 - BN_MOMENTUM
            running_mean += BN_MOMENTUM * mean
            running_var *= 1 - BN_MOMENTUM
            running_var += BN_MOMENTUM * unbiased
    else:
        xc = x - running_mean[None, :, None]
        var = running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = xc * inv_std[None, :, None]
    out = gamma[None, :, None] * xhat + beta[None, :, None]
    return out, (xhat, inv_std, gamma, train)


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = _channel_sum(dout * xhat)
    dbeta = _channel_sum(dout)
    scale = gamma * inv_std
    if not train:
        return dout * scale[None, :, None], dgamma, dbeta
    n = dout.shape[0] * dout.shape[2]
    dx = (scale / n)[None, :, None] * (n * dout - dbeta[None, :, None] - xhat * dgamma[None, :, None])
    return dx, dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def maxpool_forward(x, size=2):
    """Non-overlapping max pool (kernel = stride = 2); ties route the gradient to the first element."""
    if size != 2:
        raise ValueError("only size-2 max pooling is used")
    lo = x.shape[2] // 2
    a = x[:, :, 0 : 2 * lo : 2]
    b = x[:, :, 1 : 2 * lo : 2]
    first = a >= b
    return np.where(first, a, b), (x.shape, first)


def maxpool_backward(dout, cache):
    shape, first = cache
    lo = dout.shape[2]
    dx = np.zeros(shape)
    dx[:, :, 0 : 2 * lo : 2] = dout * first
    dx[:, :, 1 : 2 * lo : 2] = dout * ~first
    return dx


def avgpool_forward(x, size):
    b, c, length = x.shape
    lo = length // size
    return x[:, :, : lo * size].reshape(b, c, lo, size).mean(axis=3), (x.shape, size)


def avgpool_backward(dout, cache):
    (b, c, length), size = cache
    dx = np.zeros((b, c, length))
    dx[:, :, : dout.shape[2] * size] = np.repeat(dout / size, size, axis=2)
    return dx


def upsample_forward(x, factor):
    """Nearest-neighbour repetition along time."""
    return np.repeat(x, factor, axis=2)


def upsample_backward(dout, factor):
    b, c, length = dout.shape
    return dout.reshape(b, c, length // factor, factor).sum(axis=3)


def softmax_forward(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(dout, probs):
    return probs * (dout - np.sum(dout * probs, axis=1, keepdims=True))
