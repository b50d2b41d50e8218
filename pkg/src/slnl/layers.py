"""Layer primitives on (B, C, T, N) feature maps.

Unbatched (C, T, N) inputs are accepted by :func:`conv2d`, :func:`maxpool2`
and :func:`global_avg_pool`; a batch axis of one is added and removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, _record, add, as_tensor, matmul, transpose

__all__ = [
    "BatchNormParams",
    "batchnorm",
    "conv2d",
    "dense",
    "dropout",
    "global_avg_pool",
    "maxpool2",
]


def _correlate(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same-size cross-correlation; returns (output, im2col windows)."""
    _, _, kt, kn = w.shape
    pt, pn = (kt - 1) // 2, (kn - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pt), (pn, pn)))
    cols = sliding_window_view(xp, (kt, kn), axis=(2, 3))  # B, C, T, N, kt, kn
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # B, T, N, O
    return out.transpose(0, 3, 1, 2), cols


def conv2d(x, weight, bias=None) -> Tensor:
    """Stride-1, zero-padded 2-D convolution with odd kernel extents.

    ``weight`` has shape (C_out, C_in, k_t, k_n); output keeps T and N.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 4:
        raise ShapeError(f"kernel must be 4-D, got {weight.shape}")
    c_out, c_in, kt, kn = weight.shape
    if kt % 2 == 0 or kn % 2 == 0:
        raise ShapeError(f"kernel extents must be odd, got {kt}x{kn}")
    unbatched = x.ndim == 3
    xd = x.data[None] if unbatched else x.data
    if xd.ndim != 4 or xd.shape[1] != c_in:
        raise ShapeError(f"input {x.shape} incompatible with kernel {weight.shape}")
    wd = weight.data
    out, cols = _correlate(xd, wd)
    flipped = np.ascontiguousarray(wd[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))

    def vjp(g):
        g4 = g[None] if unbatched else g
        gw = np.tensordot(g4, cols, axes=([0, 2, 3], [0, 2, 3]))
        gx = _correlate(g4, flipped)[0]
        return (gx[0] if unbatched else gx), gw

    y = _record("conv2d", out[0] if unbatched else out, (x, weight), vjp)
    if bias is not None:
        y = add(y, as_tensor(bias).reshape((c_out, 1, 1)))
    return y


def dense(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped (out, in)."""
    y = matmul(x, transpose(weight))
    return y if bias is None else add(y, bias)


def maxpool2(x) -> Tensor:
    """2x2 max pooling with stride 2 over the last two axes; extents floor-halve."""
    x = as_tensor(x)
    xd = x.data
    *lead, t, n = xd.shape
    t2, n2 = t // 2, n // 2
    if t2 == 0 or n2 == 0:
        raise ShapeError(f"cannot pool a {t}x{n} map")
    win = xd[..., : 2 * t2, : 2 * n2].reshape(*lead, t2, 2, n2, 2)
    win = np.moveaxis(win, -3, -2).reshape(*lead, t2, n2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def vjp(g):
        onehot = np.zeros(win.shape)
        np.put_along_axis(onehot, idx[..., None], g[..., None], axis=-1)
        onehot = onehot.reshape(*lead, t2, n2, 2, 2)
        onehot = np.moveaxis(onehot, -2, -3).reshape(*lead, 2 * t2, 2 * n2)
        gx = np.zeros_like(xd)
        gx[..., : 2 * t2, : 2 * n2] = onehot
        return (gx,)

    return _record("maxpool2", out, (x,), vjp)


def global_avg_pool(x) -> Tensor:
    """Average over the last two axes: (..., C, T, N) -> (..., C)."""
    x = as_tensor(x)
    shape = x.shape
    count = shape[-1] * shape[-2]

    def vjp(g):
        return (np.broadcast_to(g[..., None, None] / count, shape).copy(),)

    return _record("global_avg_pool", x.data.mean(axis=(-2, -1)), (x,), vjp)


@dataclass(eq=False)
class BatchNormParams:
    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    momentum: float = 0.9
    eps: float = 1e-5

    @classmethod
    def init(cls, channels: int) -> "BatchNormParams":
        return cls(
            gamma=Tensor(np.ones(channels), requires_grad=True),
            beta=Tensor(np.zeros(channels), requires_grad=True),
            running_mean=Tensor(np.zeros(channels)),
            running_var=Tensor(np.ones(channels)),
        )


def batchnorm(x, params: BatchNormParams, mode: str = "train") -> Tensor:
    """Per-channel normalization of (B, C, ...) inputs.

    Train mode normalizes with the batch's biased moments and folds them into
    the running statistics; eval mode uses the running statistics only.
    """
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[1] != params.gamma.size:
        raise ShapeError(f"batchnorm over {params.gamma.size} channels got input {x.shape}")
    xd = x.data
    axes = (0,) + tuple(range(2, xd.ndim))
    bshape = (1, -1) + (1,) * (xd.ndim - 2)
    gamma = params.gamma.data.reshape(bshape)
    beta = params.beta.data.reshape(bshape)

    if mode == "train":
        mu = xd.mean(axis=axes, keepdims=True)
        var = xd.var(axis=axes, keepdims=True)
        mom = params.momentum
        params.running_mean.data = mom * params.running_mean.data + (1 - mom) * mu.ravel()
        params.running_var.data = mom * params.running_var.data + (1 - mom) * var.ravel()
    elif mode == "eval":
        mu = params.running_mean.data.reshape(bshape)
        var = params.running_var.data.reshape(bshape)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    inv_std = 1.0 / np.sqrt(var + params.eps)
    xhat = (xd - mu) * inv_std
    out = gamma * xhat + beta
    count = xd.size // xd.shape[1]

    def vjp(g):
        g_gamma = (g * xhat).sum(axis=axes)
        g_beta = g.sum(axis=axes)
        gxhat = g * gamma
        if mode == "eval":
            gx = gxhat * inv_std
        else:
            gx = inv_std / count * (
                count * gxhat
                - gxhat.sum(axis=axes, keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=axes, keepdims=True)
            )
        return gx, g_gamma, g_beta

    return _record("batchnorm", out, (x, params.gamma, params.beta), vjp)


def dropout(x, rate: float, mode: str = "train", seed=None) -> Tensor:
    """Inverted dropout; identity in eval mode or at rate 0.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    x = as_tensor(x)
    if mode == "eval" or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scale = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _record("dropout", x.data * scale, (x,), lambda g: (g * scale,))
