"""Forward/backward pairs for every layer type.

Each ``*_forward`` returns ``(out, cache)``; the matching ``*_backward`` takes
the upstream gradient and that cache. Arrays are NCHW for images and NK for
flat features. Reductions accumulate in float64 whatever the storage dtype.
"""
import numpy as np

from .. import kernels

BN_EPS = 1e-5


def _need(cache, name):
    if cache is None:
        raise RuntimeError(f"{name}_backward called without cached forward activations")


# ---------------------------------------------------------------- conv 3x3, stride 1, pad 1

def conv3x3_forward(x, w, b):
    n, c, h, wd = x.shape
    o = w.shape[0]
    if w.shape != (o, c, 3, 3):
        raise ValueError(f"weights {w.shape} do not match {c} input channels")
    cols = kernels.im2col3(np.ascontiguousarray(x))
    out = np.matmul(w.reshape(o, c * 9), cols)
    out += b.reshape(1, o, 1).astype(out.dtype)
    return out.reshape(n, o, h, wd), (x.shape, cols, w)


def conv3x3_backward(dout, cache):
    _need(cache, "conv3x3")
    (n, c, h, wd), cols, w = cache
    o = w.shape[0]
    d2 = dout.reshape(n, o, h * wd)
    dw = np.matmul(d2, cols.transpose(0, 2, 1)).sum(axis=0, dtype=np.float64)
    db = d2.sum(axis=(0, 2), dtype=np.float64)
    dcols = np.matmul(w.reshape(o, c * 9).T, d2)
    dx = kernels.col2im3(np.ascontiguousarray(dcols), c, h, wd)
    return dx, dw.reshape(w.shape).astype(w.dtype), db.astype(w.dtype)


# ---------------------------------------------------------------- batch norm

def batchnorm_forward(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=BN_EPS):
    """Per-channel normalization of NCHW (or NC) input.

    In training mode the running statistics arrays are updated in place.
    """
    axes = (0,) + tuple(range(2, x.ndim))
    shape = (1, -1) + (1,) * (x.ndim - 2)
    if training:
        m = x.size // x.shape[1]
        if x.shape[0] < 2:
            raise ValueError("batch norm in training mode needs a batch of at least 2")
        x64 = x.astype(np.float64)
        mu = x64.mean(axis=axes)
        var = x64.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * m / (m - 1)
    else:
        x64 = x.astype(np.float64)
        mu = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x64 - mu.reshape(shape)) * inv_std.reshape(shape)
    out = xhat * gamma.reshape(shape) + beta.reshape(shape)
    return out.astype(x.dtype), (xhat, inv_std, gamma, training, axes, shape)


def batchnorm_backward(dout, cache):
    _need(cache, "batchnorm")
    xhat, inv_std, gamma, training, axes, shape = cache
    d = dout.astype(np.float64)
    dgamma = (d * xhat).sum(axis=axes)
    dbeta = d.sum(axis=axes)
    g = gamma.astype(np.float64).reshape(shape)
    if training:
        m = d.size // d.shape[1]
        dx = (g * inv_std.reshape(shape) / m) * (
            m * d - dbeta.reshape(shape) - xhat * dgamma.reshape(shape)
        )
    else:
        dx = d * g * inv_std.reshape(shape)
    return dx.astype(dout.dtype), dgamma.astype(gamma.dtype), dbeta.astype(gamma.dtype)


# ---------------------------------------------------------------- relu / pooling

def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, cache):
    _need(cache, "relu")
    return dout * cache


def maxpool_forward(x):
    """2x2 max pooling, stride 2; odd trailing rows/columns are dropped."""
    out, arg = kernels.maxpool2(np.ascontiguousarray(x))
    return out, (arg, x.shape[2], x.shape[3])


def maxpool_backward(dout, cache):
    _need(cache, "maxpool")
    arg, h, w = cache
    return kernels.maxpool2_backward(np.ascontiguousarray(dout), arg, h, w)


def gap_forward(x):
    return x.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype), x.shape


def gap_backward(dout, cache):
    _need(cache, "gap")
    n, c, h, w = cache
    scale = dout / (h * w)
    return np.broadcast_to(scale[:, :, None, None], cache).astype(dout.dtype)


# ---------------------------------------------------------------- linear

def linear_forward(x, w, b):
    """y = x W^T + b with W of shape (out, in)."""
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"input width {x.shape[1]} does not match weights {w.shape}")
    return x @ w.T + b, (x, w)


def linear_backward(dout, cache):
    _need(cache, "linear")
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


# ---------------------------------------------------------------- loss

def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError("one label per row required")
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return loss, (grad / n).astype(logits.dtype)
