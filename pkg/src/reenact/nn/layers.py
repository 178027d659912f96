"""Neural network layers with hand-written forward and backward passes.

All activations are NCHW float arrays; layers preserve the input dtype so the
same code runs the 32-bit training path and the 64-bit gradient-check path.
Each forward returns (output, cache); the matching backward consumes the cache
and returns input gradients plus parameter gradients where applicable.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5


def _out_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def im2col(x: np.ndarray, kernel: int, stride: int, pad: int) -> np.ndarray:
    """Flatten conv windows: (N, C, H, W) -> (N, H_out * W_out, C * k * k)."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    h_out, w_out = win.shape[2], win.shape[3]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)) \
        .reshape(n, h_out * w_out, c * kernel * kernel)


def col2im(cols: np.ndarray, x_shape: tuple, kernel: int, stride: int,
           pad: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add window columns back onto the image."""
    n, c, h, w = x_shape
    h_out = _out_size(h, kernel, stride, pad)
    w_out = _out_size(w, kernel, stride, pad)
    blocks = cols.reshape(n, h_out, w_out, c, kernel, kernel)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(kernel):
        for kj in range(kernel):
            xp[:, :, ki:ki + stride * h_out:stride, kj:kj + stride * w_out:stride] \
                += blocks[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return xp[:, :, pad:pad + h, pad:pad + w]


# ---------------------------------------------------------------------------
# convolution and transposed convolution
# ---------------------------------------------------------------------------

def conv2d_forward(x, weight, bias, stride: int, pad: int):
    """weight: (C_out, C_in, k, k); returns (N, C_out, H_out, W_out)."""
    n = x.shape[0]
    c_out, c_in, k, _ = weight.shape
    if x.shape[1] != c_in:
        raise ValueError(f"conv input has {x.shape[1]} channels, weight expects {c_in}")
    cols = im2col(x, k, stride, pad)
    out = cols @ weight.reshape(c_out, -1).T + bias
    h_out = _out_size(x.shape[2], k, stride, pad)
    w_out = _out_size(x.shape[3], k, stride, pad)
    out = out.transpose(0, 2, 1).reshape(n, c_out, h_out, w_out)
    return out, (x.shape, cols, weight, stride, pad)


def conv2d_backward(dout, cache):
    x_shape, cols, weight, stride, pad = cache
    n = dout.shape[0]
    c_out, c_in, k, _ = weight.shape
    dmat = np.ascontiguousarray(
        dout.reshape(n, c_out, -1).transpose(0, 2, 1))     # (N, P, C_out)
    dweight = (dmat.reshape(-1, c_out).T
               @ cols.reshape(-1, cols.shape[2])).reshape(weight.shape)
    dbias = dout.sum(axis=(0, 2, 3))
    dcols = dmat @ weight.reshape(c_out, -1)
    dx = col2im(dcols, x_shape, k, stride, pad)
    return dx, dweight, dbias


def conv_transpose2d_forward(x, weight, bias, stride: int, pad: int):
    """weight: (C_in, C_out, k, k); stride-2 kernel-4 pad-1 exactly doubles size."""
    n, c_in, h, w = x.shape
    if c_in != weight.shape[0]:
        raise ValueError(
            f"deconv input has {c_in} channels, weight expects {weight.shape[0]}")
    c_out, k = weight.shape[1], weight.shape[2]
    h_out = (h - 1) * stride - 2 * pad + k
    w_out = (w - 1) * stride - 2 * pad + k
    xmat = x.reshape(n, c_in, -1).transpose(0, 2, 1)       # (N, P, C_in)
    cols = xmat @ weight.reshape(c_in, -1)                  # (N, P, C_out*k*k)
    out = col2im(cols, (n, c_out, h_out, w_out), k, stride, pad)
    out += bias[None, :, None, None]
    return out, (xmat, x.shape, weight, stride, pad)


def conv_transpose2d_backward(dout, cache):
    xmat, x_shape, weight, stride, pad = cache
    c_in, c_out, k, _ = weight.shape
    dcols = im2col(dout, k, stride, pad)                    # (N, P, C_out*k*k)
    dx = dcols @ weight.reshape(c_in, -1).T                 # (N, P, C_in)
    dx = dx.transpose(0, 2, 1).reshape(x_shape)
    dweight = (np.ascontiguousarray(xmat).reshape(-1, c_in).T
               @ dcols.reshape(-1, dcols.shape[2])).reshape(weight.shape)
    dbias = dout.sum(axis=(0, 2, 3))
    return dx, dweight, dbias


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------

def batchnorm_forward(x, gamma, beta, running_mean, running_var,
                      mode: str, momentum: float = 0.99):
    """Per-channel BN over (N, H, W); train mode updates running stats in place."""
    if mode == "train":
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    elif mode == "infer":
        mean, var = running_mean, running_var
    else:
        raise ValueError(f"unknown batchnorm mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv_std, gamma, mode)


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, mode = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    if mode == "infer":
        dx = dout * (gamma * inv_std)[None, :, None, None]
        return dx, dgamma, dbeta
    n, _, h, w = dout.shape
    m = n * h * w
    dxhat = dout * gamma[None, :, None, None]
    dx = (inv_std[None, :, None, None] / m) * (
        m * dxhat
        - dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        - xhat * (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None])
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# pointwise activations
# ---------------------------------------------------------------------------

def leaky_relu_forward(x, slope: float = 0.2):
    out = np.where(x >= 0, x, slope * x)
    return out, (x >= 0, slope)


def leaky_relu_backward(dout, cache):
    positive, slope = cache
    return np.where(positive, dout, slope * dout)


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dout, cache):
    return dout * cache


def tanh_forward(x):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout, cache):
    return dout * (1.0 - cache * cache)


def sigmoid_forward(x):
    out = 1.0 / (1.0 + np.exp(-x))
    return out, out


def sigmoid_backward(dout, cache):
    return dout * cache * (1.0 - cache)


def dropout_forward(x, prob: float, mode: str, rng: np.random.Generator | None):
    """Inverted dropout; the seeded mask makes train-mode passes repeatable."""
    if mode == "infer" or prob <= 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    keep = 1.0 - prob
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
    return x * mask, mask


def dropout_backward(dout, cache):
    return dout if cache is None else dout * cache


def concat_forward(a, b):
    """Channel concatenation for skip connections."""
    return np.concatenate([a, b], axis=1), a.shape[1]


def concat_backward(dout, cache):
    return dout[:, :cache], dout[:, cache:]
