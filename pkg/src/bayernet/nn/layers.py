"""Forward and backward kernels for the 3x3 conv / batch-norm / ReLU blocks.

Tensors are NHWC.  Convolution kernels are ``(3, 3, Cin, Cout)``.
"""
from __future__ import annotations

import numpy as np

KSIZE = 3


def _tap_sum(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    """Sum over the nine taps of ``shift(x @ w[kh, kw])`` on the zero-padded grid.

    Each tap is one contiguous matmul over the padded image; only the
    ``(n, h, w, cout)`` result slices are strided.
    """
    n, h, wd, cin = x.shape
    cout = w.shape[3]
    d = dilation
    flat = np.pad(x, ((0, 0), (d, d), (d, d), (0, 0))).reshape(-1, cin)
    out = np.zeros((n, h, wd, cout), dtype=np.result_type(x, w))
    for kh in range(KSIZE):
        for kw in range(KSIZE):
            y = (flat @ w[kh, kw]).reshape(n, h + 2 * d, wd + 2 * d, cout)
            out += y[:, kh * d : kh * d + h, kw * d : kw * d + wd]
    return out


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int = 1) -> np.ndarray:
    """Same-size 3x3 cross-correlation with zero padding.

    A dilation of ``d`` spreads the taps ``d`` pixels apart, so the receptive
    field is ``(2d + 1)``-square with no extra weights.
    """
    if x.ndim != 4:
        raise ValueError(f"expected NHWC tensor, got shape {x.shape}")
    if w.shape[:2] != (KSIZE, KSIZE) or w.shape[2] != x.shape[3]:
        raise ValueError(f"kernel {w.shape} does not match input channels {x.shape[3]}")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    out = _tap_sum(x, w, dilation)
    out += b
    return out


def conv2d_backward(dout, x, w, dilation: int = 1, input_grad: bool = True):
    """Gradients ``(dx, dw, db)`` of :func:`conv2d`; ``dx`` is None without ``input_grad``."""
    n, h, wd, cin = x.shape
    cout = w.shape[3]
    d = dilation
    # dx is the same convolution of dout with the flipped, transposed kernel
    dx = _tap_sum(dout, w[::-1, ::-1].transpose(0, 1, 3, 2), d) if input_grad else None
    xp = np.pad(x, ((0, 0), (d, d), (d, d), (0, 0)))
    g = dout.reshape(-1, cout)
    dw = np.empty_like(w, dtype=np.result_type(x, dout))
    for kh in range(KSIZE):
        for kw in range(KSIZE):
            shifted = xp[:, kh * d : kh * d + h, kw * d : kw * d + wd].reshape(-1, cin)
            dw[kh, kw] = shifted.T @ g
    db = g.sum(axis=0)
    return dx, dw, db


def batch_norm_infer(x, gamma, beta, mean, var, eps: float = 1e-5):
    var = np.asarray(var)
    if np.any(var < 0):
        raise ValueError("running variance must be non-negative")
    scale = gamma / np.sqrt(var + eps)
    return (x - mean) * scale + beta


def batch_norm_train(x, gamma, beta, eps: float = 1e-5):
    """Normalise with batch statistics over N, H, W.

    Returns ``(y, cache)`` where the cache holds what the backward pass and
    the running-statistics update need.
    """
    axes = (0, 1, 2)
    mu = x.mean(axis=axes)
    var = x.var(axis=axes)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    y = xhat * gamma + beta
    count = x.shape[0] * x.shape[1] * x.shape[2]
    return y, {"xhat": xhat, "inv_std": inv_std, "mean": mu, "var": var, "count": count}


def batch_norm_backward(dy, gamma, cache):
    axes = (0, 1, 2)
    xhat = cache["xhat"]
    m = cache["count"]
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    dx = (cache["inv_std"] / m) * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
    return dx, dgamma, dbeta


def relu(x):
    return np.maximum(x, 0)


def relu_backward(dy, y):
    return dy * (y > 0)
