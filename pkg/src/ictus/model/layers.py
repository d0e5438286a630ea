"""Array-level layer primitives with hand-written backward passes.

Feature maps are channels-last (batch, height, width, channels), dense
activations (batch, features).

The spatial maps here are tall and narrow (width is the 10-scale axis), so
a same-padded k x k convolution is computed row-blockwise: every output row
is one GEMM row whose reduction spans its k padded input rows
(k * padded_width * C values, gathered as contiguous memcpys), against a
block kernel of shape (k * padded_width * C, width * F) that holds each true
weight once per output column and zeros elsewhere.  That trades a few idle
multiplies inside a near-peak GEMM for the scattered im2col gather that
otherwise dominates on narrow maps.  The backward pass reuses the gathered
rows for the weight gradient and runs the mirrored block GEMM (flipped,
channel-swapped kernel) for the input gradient.

Everything is deterministic for a fixed input; the only randomness
(dropout) comes from the caller's generator.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@lru_cache(maxsize=64)
def _block_kernel_indices(c: int, f: int, width: int, k: int):
    """Index arrays mapping (F, C, k, k) weights into the block kernel.

    Returns (rows, cols, src, shape): block[rows, cols] = w.ravel()[src],
    with block shape (k * (width + 2*pad) * C, width * F).  Each true weight
    lands once per output column q at reduction offset (di, q + dj, c).
    """
    pad = k // 2
    wp = width + 2 * pad
    fi, ci, di, dj, q = np.meshgrid(
        np.arange(f), np.arange(c), np.arange(k), np.arange(k), np.arange(width),
        indexing="ij",
    )
    rows = (di * wp + dj + q) * c + ci
    cols = q * f + fi
    src = ((fi * c + ci) * k + di) * k + dj
    return rows.ravel(), cols.ravel(), src.ravel(), (k * wp * c, width * f)


def _block_kernel(w: np.ndarray, width: int) -> np.ndarray:
    f, c, k, _ = w.shape
    rows, cols, src, shape = _block_kernel_indices(c, f, width, k)
    block = np.zeros(shape, dtype=w.dtype)
    block[rows, cols] = w.ravel()[src]
    return block


def _row_patches(x: np.ndarray, k: int) -> np.ndarray:
    """(B, H, W, C) -> (B*H, k*(W+2*pad)*C) gathered padded row blocks."""
    b, h, w, c = x.shape
    pad = k // 2
    wpc = (w + 2 * pad) * c
    xp = np.zeros((b, h + 2 * pad, wpc), dtype=x.dtype)
    xp[:, pad: h + pad, pad * c: (w + pad) * c] = x.reshape(b, h, w * c)
    rows = np.empty((b, h, k, wpc), dtype=x.dtype)
    for di in range(k):  # k bulk copies beat a strided window gather here
        rows[:, :, di, :] = xp[:, di: di + h, :]
    return rows.reshape(b * h, k * wpc)


def conv2d(x, w, b):
    """Same-padded stride-1 convolution: (B, H, W, C) -> (B, H, W, F)."""
    f, c, k, _ = w.shape
    bsz, h, wd, _ = x.shape
    rows = _row_patches(x, k)
    out = rows @ _block_kernel(w, wd)
    out = out.reshape(bsz, h, wd, f)
    out += b
    return out, (rows, x.shape, w.shape)


def conv2d_backward(dy, cache, w):
    rows, x_shape, w_shape = cache
    f, c, k, _ = w_shape
    bsz, h, wd, _ = x_shape

    dy2 = dy.reshape(bsz * h, wd * f)
    db = dy.sum(axis=(0, 1, 2))

    dblock = rows.T @ dy2
    r_idx, c_idx, src, _ = _block_kernel_indices(c, f, wd, k)
    dw = np.zeros(f * c * k * k, dtype=w.dtype)
    np.add.at(dw, src, dblock[r_idx, c_idx])
    dw = dw.reshape(w_shape)

    # full correlation with the flipped, channel-swapped kernel
    w_back = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    dy_rows = _row_patches(dy, k)
    dx = (dy_rows @ _block_kernel(w_back, wd)).reshape(x_shape)
    return dx, dw, db


def batchnorm(x, gamma, beta, running_mean, running_var, train: bool):
    """Per-channel batch norm over (B, H, W); returns updated running stats."""
    if train:
        mu = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xh = (x - mu) * inv_std
        new_mean = (1 - BN_MOMENTUM) * running_mean + BN_MOMENTUM * mu
        new_var = (1 - BN_MOMENTUM) * running_var + BN_MOMENTUM * var
        return gamma * xh + beta, (xh, inv_std, gamma), new_mean, new_var
    # inference: one fused affine pass against the running statistics
    scale = (gamma / np.sqrt(running_var + BN_EPS)).astype(x.dtype)
    shift = (beta - running_mean * scale).astype(x.dtype)
    y = x * scale
    y += shift
    return y, None, running_mean, running_var


def bn_fold(w, b, gamma, beta, running_mean, running_var):
    """Fold inference-mode batch norm into conv weights: conv then affine."""
    scale = gamma / np.sqrt(running_var + BN_EPS)
    w_eff = w * scale[:, None, None, None]
    b_eff = b * scale + beta - running_mean * scale
    return w_eff.astype(w.dtype), b_eff.astype(b.dtype)


def batchnorm_backward(dy, cache):
    """Backward through train-mode batch norm, including the batch statistics."""
    xh, inv_std, gamma = cache
    m = dy.shape[0] * dy.shape[1] * dy.shape[2]
    dgamma = (dy * xh).sum(axis=(0, 1, 2))
    dbeta = dy.sum(axis=(0, 1, 2))
    dxh = dy * gamma
    s1 = dxh.sum(axis=(0, 1, 2))
    s2 = (dxh * xh).sum(axis=(0, 1, 2))
    dx = (inv_std / m) * (m * dxh - s1 - xh * s2)
    return dx, dgamma, dbeta


def relu(x, need_mask: bool = True):
    if not need_mask:
        return np.maximum(x, 0.0, out=x), None
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def maxpool2(x, need_cache: bool = True):
    """2x2/stride-2 max pooling with floor semantics (odd edges cropped)."""
    b, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    xc = x[:, : h2 * 2, : w2 * 2, :]
    if not need_cache:
        m = np.maximum(xc[:, 0::2, 0::2, :], xc[:, 0::2, 1::2, :])
        m = np.maximum(m, xc[:, 1::2, 0::2, :])
        m = np.maximum(m, xc[:, 1::2, 1::2, :])
        return m, None
    tiles = xc.reshape(b, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(b, h2, w2, c, 4)
    idx = tiles.argmax(axis=-1)
    out = np.take_along_axis(tiles, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(dy, cache):
    idx, x_shape = cache
    b, h, w, c = x_shape
    h2, w2 = h // 2, w // 2
    dtiles = np.zeros((b, h2, w2, c, 4), dtype=dy.dtype)
    np.put_along_axis(dtiles, idx[..., None], dy[..., None], axis=-1)
    dxc = dtiles.reshape(b, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(
        b, h2 * 2, w2 * 2, c
    )
    if h2 * 2 == h and w2 * 2 == w:
        return dxc
    dx = np.zeros(x_shape, dtype=dy.dtype)
    dx[:, : h2 * 2, : w2 * 2, :] = dxc
    return dx


def dropout(x, rate: float, rng: np.random.Generator):
    """Inverted dropout; identity when rate is 0."""
    if rate <= 0.0:
        return x, None
    mask = rng.random(x.shape, dtype=np.float32) >= rate
    keep = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    out = x * mask
    out *= keep
    return out, (mask, keep)


def dropout_backward(dy, cache):
    if cache is None:
        return dy
    mask, keep = cache
    out = dy * mask
    out *= keep
    return out


def dense(x, w, b):
    return x @ w + b, x


def dense_backward(dy, x, w):
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out.astype(x.dtype)
