"""Forward and backward passes for the layer types used by the CNN.

Activations are channels-last, ``(N, H, W, C)``. Functions that take images
also accept a single ``(H, W, C)`` example and return unbatched results.
Convolution kernels are stored ``(C_out, C_in, 3, 3)``.
"""

import numpy as np


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim != 4:
        raise ValueError(f"expected (N, H, W, C) or (H, W, C), got shape {x.shape}")
    return x, False


def _im2col(x):
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, w, 3, 3, c), dtype=x.dtype)
    for di in range(3):
        for dj in range(3):
            cols[:, :, :, di, dj, :] = xp[:, di : di + h, dj : dj + w, :]
    return cols.reshape(n * h * w, 9 * c)


def _kernel_matrix(kernels):
    c_out, c_in = kernels.shape[:2]
    return kernels.transpose(2, 3, 1, 0).reshape(9 * c_in, c_out)


def conv2d_forward(x, kernels, bias):
    """3x3 cross-correlation, stride 1, zero padding 1 (spatial size preserved).

    Returns ``(y, cache)``; the cache feeds :func:`conv2d_backward`.
    """
    x, single = _batched(x)
    kernels = np.asarray(kernels)
    if kernels.ndim != 4 or kernels.shape[2:] != (3, 3):
        raise ValueError(f"kernels must be (C_out, C_in, 3, 3), got {kernels.shape}")
    if kernels.shape[1] != x.shape[3]:
        raise ValueError(
            f"channel mismatch: input has {x.shape[3]}, kernels expect {kernels.shape[1]}"
        )
    if x.shape[1] < 3 or x.shape[2] < 3:
        raise ValueError("spatial dims must be at least 3")
    n, h, w, _ = x.shape
    cols = _im2col(x)
    y = (cols @ _kernel_matrix(kernels) + bias).reshape(n, h, w, -1)
    cache = (x.shape, cols, kernels)
    return (y[0] if single else y), cache


def conv2d_backward(grad_out, cache, need_input_grad=True):
    """Gradients ``(grad_input, grad_kernels, grad_bias)`` of the convolution."""
    in_shape, cols, kernels = cache
    g, single = _batched(grad_out)
    n, h, w, c_in = in_shape
    c_out = kernels.shape[0]
    if g.shape != (n, h, w, c_out):
        raise ValueError(f"grad_out shape {g.shape} does not match forward output {(n, h, w, c_out)}")
    g2 = g.reshape(-1, c_out)
    grad_k = (cols.T @ g2).reshape(3, 3, c_in, c_out).transpose(3, 2, 0, 1)
    grad_b = g2.sum(axis=0)
    if not need_input_grad:
        return None, grad_k, grad_b
    gcols = (g2 @ _kernel_matrix(kernels).T).reshape(n, h, w, 3, 3, c_in)
    gxp = np.zeros((n, h + 2, w + 2, c_in), dtype=gcols.dtype)
    for di in range(3):
        for dj in range(3):
            gxp[:, di : di + h, dj : dj + w, :] += gcols[:, :, :, di, dj, :]
    gx = gxp[:, 1:-1, 1:-1, :]
    return (gx[0] if single else gx), grad_k, grad_b


def _windows(x):
    return (x[:, 0::2, 0::2], x[:, 0::2, 1::2], x[:, 1::2, 0::2], x[:, 1::2, 1::2])


def maxpool_forward(x):
    """2x2 max pooling with stride 2.

    Returns ``(y, argmax)`` where ``argmax`` holds the winning position inside
    each window in row-major order (0..3); ties go to the first position.
    """
    x, single = _batched(x)
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"max pooling needs even spatial dims, got {h}x{w}")
    a, b, cc, d = _windows(x)
    y = np.maximum(np.maximum(a, b), np.maximum(cc, d))
    # scan from the last position so earlier positions overwrite on ties
    idx = np.full(y.shape, 3, dtype=np.int8)
    idx[cc == y] = 2
    idx[b == y] = 1
    idx[a == y] = 0
    if single:
        return y[0], idx[0]
    return y, idx


def maxpool_backward(grad_out, argmax):
    g, single = _batched(grad_out)
    idx = argmax[None] if single else argmax
    if g.shape != idx.shape:
        raise ValueError(f"grad_out shape {g.shape} does not match pooling indices {idx.shape}")
    n, ho, wo, c = g.shape
    gx = np.empty((n, 2 * ho, 2 * wo, c), dtype=g.dtype)
    for pos, view in enumerate(_windows(gx)):
        np.multiply(g, idx == pos, out=view)
    return gx[0] if single else gx


def relu(x):
    return np.maximum(x, 0)


def relu_backward(grad_out, x):
    return grad_out * (x > 0)


def fc_forward(x, weights, bias, activation="none"):
    """``phi(W x + b)`` for a vector or a batch of row vectors."""
    x = np.asarray(x)
    if x.shape[-1] != weights.shape[1]:
        raise ValueError(f"dimension mismatch: input {x.shape[-1]}, weights {weights.shape}")
    z = x @ weights.T + bias
    if activation == "relu":
        return relu(z)
    if activation != "none":
        raise ValueError(f"unknown activation {activation!r}")
    return z


def fc_backward(grad_out, x, weights):
    """Gradients ``(grad_x, grad_w, grad_b)`` of the affine map for batched rows."""
    return grad_out @ weights, grad_out.T @ x, grad_out.sum(axis=0)


def dropout(x, rate=0.5, training=True, rng=None):
    """Inverted dropout. Returns ``(y, mask)``; survivors are scaled by ``1/(1-rate)``."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x)
    if not training or rate == 0:
        return x, np.ones(x.shape, dtype=bool)
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = rng.random(x.shape) >= rate
    return x * mask / x.dtype.type(1 - rate), mask


def dropout_backward(grad_out, mask, rate):
    return grad_out * mask / grad_out.dtype.type(1 - rate)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def l2_penalty(weights):
    total = 0.0
    for w in weights:
        r = np.ravel(w)
        total += float(np.dot(r, r))
    return total


def loss_ce_l2(logits, labels, weight_decay=0.0, weights=()):
    """Softmax cross-entropy plus ``weight_decay * sum ||W||^2``.

    ``logits`` is ``(C,)`` with an int label, or ``(N, C)`` with ``N`` labels;
    the batch loss is the mean cross-entropy. Returns ``(loss, grad_logits)``
    where the gradient covers the cross-entropy part only.
    """
    logits = np.asarray(logits)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    y = np.atleast_1d(np.asarray(labels))
    n, c = z.shape
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if np.any(y < 0) or np.any(y >= c):
        raise ValueError(f"label out of range for {c} classes")
    if weight_decay < 0:
        raise ValueError("weight_decay must be non-negative")
    p = softmax(z)
    zs = z.astype(np.float64) - z.max(axis=1, keepdims=True)
    log_p = zs[np.arange(n), y] - np.log(np.exp(zs).sum(axis=1))
    loss = -log_p.mean()
    if weight_decay:
        loss += weight_decay * l2_penalty(weights)
    grad = p
    grad[np.arange(n), y] -= 1.0
    grad = (grad / n).astype(logits.dtype if logits.dtype.kind == "f" else np.float64)
    return float(loss), (grad[0] if single else grad)
