"""Local, non-local and synchronous local/non-local (SLnL) blocks.

A non-local module treats a feature map as M positions with P channels and
returns, for every position, an affinity-weighted average of linearly
embedded features over all positions:

    y_i = W_w sum_j softmax_j(theta(x_i) . psi(x_j)) W_g x_j

The affinity is the embedded Gaussian exp(theta . psi) normalized by its row
sum, i.e. a softmax over j. Which positions form the set depends on the axis:
``temporal`` (per joint, M = T), ``spatial`` (per frame, M = N) or
``spatiotemporal`` (M = T N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import BatchNormParams, batchnorm, conv2d
from .tensor import ShapeError, Tensor, add, as_tensor, matmul, relu, reshape, softmax, transpose

AXES = ("temporal", "spatial", "spatiotemporal")

__all__ = [
    "AXES",
    "LocalBlockParams",
    "NonLocalParams",
    "SLnLBlockParams",
    "affinity",
    "affinity_field",
    "empirical_affinity_field",
    "local_block",
    "nonlocal_1d",
    "nonlocal_2d",
    "nonlocal_forward",
    "nonlocal_map",
    "slnl_block",
]


def _uniform(rng, shape, fan_in):
    lim = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-lim, lim, shape), requires_grad=True)


@dataclass(eq=False)
class NonLocalParams:
    w_g: Tensor  # (Q, P)
    w_phi: Tensor  # (L, P)
    w_psi: Tensor  # (L, P)
    w_w: Tensor  # (Q, Q)
    axis: str = "spatiotemporal"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        q, p = self.w_g.shape
        if self.w_phi.shape != self.w_psi.shape or self.w_phi.shape[1] != p:
            raise ShapeError("theta/psi embeddings must both be (L, P)")
        if self.w_w.shape != (q, q):
            raise ShapeError(f"weighting matrix must be ({q}, {q}), got {self.w_w.shape}")

    @classmethod
    def init(cls, p: int, q: int, embed: int, axis: str, rng) -> "NonLocalParams":
        return cls(
            w_g=_uniform(rng, (q, p), p),
            w_phi=_uniform(rng, (embed, p), p),
            w_psi=_uniform(rng, (embed, p), p),
            w_w=_uniform(rng, (q, q), q),
            axis=axis,
        )


def affinity(x, params: NonLocalParams) -> Tensor:
    """Row-normalized embedded-Gaussian affinity, shape (..., M, M)."""
    x = as_tensor(x)
    theta = matmul(x, transpose(params.w_phi))
    psi = matmul(x, transpose(params.w_psi))
    axes = tuple(range(psi.ndim - 2)) + (psi.ndim - 1, psi.ndim - 2)
    return softmax(matmul(theta, transpose(psi, axes)))


def nonlocal_forward(x, params: NonLocalParams) -> Tensor:
    """(..., M, P) -> (..., M, Q)."""
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[-2] < 1:
        raise ShapeError(f"non-local input must be (..., M, P), got {x.shape}")
    if x.shape[-1] != params.w_g.shape[1]:
        raise ShapeError(f"expected {params.w_g.shape[1]} channels, got {x.shape[-1]}")
    g = matmul(x, transpose(params.w_g))
    y = matmul(affinity(x, params), g)
    return matmul(y, transpose(params.w_w))


def nonlocal_map(x, params: NonLocalParams) -> Tensor:
    """Apply a non-local module to a (B, C, T, N) map along ``params.axis``."""
    x = as_tensor(x)
    unbatched = x.ndim == 3
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    b, c, t, n = x.shape
    q = params.w_g.shape[0]
    if params.axis == "temporal":
        rows = transpose(x, (0, 3, 2, 1))  # B, N, T, C
        out = transpose(nonlocal_forward(rows, params), (0, 3, 2, 1))
    elif params.axis == "spatial":
        rows = transpose(x, (0, 2, 3, 1))  # B, T, N, C
        out = transpose(nonlocal_forward(rows, params), (0, 3, 1, 2))
    else:
        rows = reshape(transpose(x, (0, 2, 3, 1)), (b, t * n, c))
        out = transpose(reshape(nonlocal_forward(rows, params), (b, t, n, q)), (0, 3, 1, 2))
    return reshape(out, out.shape[1:]) if unbatched else out


def nonlocal_1d(x, params: NonLocalParams, axis: str) -> Tensor:
    if axis not in ("temporal", "spatial"):
        raise ValueError(f"1-D non-local axis must be temporal or spatial, got {axis!r}")
    return nonlocal_map(x, NonLocalParams(params.w_g, params.w_phi, params.w_psi, params.w_w, axis))


def nonlocal_2d(x, params: NonLocalParams) -> Tensor:
    return nonlocal_map(x, NonLocalParams(params.w_g, params.w_phi, params.w_psi, params.w_w,
                                          "spatiotemporal"))


@dataclass(eq=False)
class LocalBlockParams:
    t_weight: Tensor  # (C_out, C, k, 1)
    t_bias: Tensor
    s_weight: Tensor  # (C_out, C, 1, k)
    s_bias: Tensor
    st_weight: Tensor  # (C_out, C, k, k)
    st_bias: Tensor
    res_weight: Tensor | None  # (C_out, C, 1, 1) when channels change
    bn: BatchNormParams

    @property
    def k(self) -> int:
        return self.st_weight.shape[2]

    @property
    def channels(self) -> tuple[int, int]:
        c_out, c_in = self.st_weight.shape[:2]
        return c_in, c_out

    @classmethod
    def init(cls, c_in: int, c_out: int, k: int, rng) -> "LocalBlockParams":
        if k % 2 == 0:
            raise ValueError(f"kernel extent must be odd, got {k}")
        zeros = lambda: Tensor(np.zeros(c_out), requires_grad=True)  # noqa: E731
        return cls(
            t_weight=_uniform(rng, (c_out, c_in, k, 1), c_in * k),
            t_bias=zeros(),
            s_weight=_uniform(rng, (c_out, c_in, 1, k), c_in * k),
            s_bias=zeros(),
            st_weight=_uniform(rng, (c_out, c_in, k, k), c_in * k * k),
            st_bias=zeros(),
            res_weight=None if c_in == c_out else _uniform(rng, (c_out, c_in, 1, 1), c_in),
            bn=BatchNormParams.init(c_out),
        )


@dataclass(eq=False)
class SLnLBlockParams:
    local: LocalBlockParams
    temporal: NonLocalParams
    spatial: NonLocalParams
    spatiotemporal: NonLocalParams

    @classmethod
    def init(cls, c_in: int, c_out: int, k: int, rng, embed: int | None = None):
        embed = embed or max(1, c_out // 2)
        return cls(
            local=LocalBlockParams.init(c_in, c_out, k, rng),
            temporal=NonLocalParams.init(c_in, c_out, embed, "temporal", rng),
            spatial=NonLocalParams.init(c_in, c_out, embed, "spatial", rng),
            spatiotemporal=NonLocalParams.init(c_in, c_out, embed, "spatiotemporal", rng),
        )


def _local_branches(x: Tensor, p: LocalBlockParams) -> Tensor:
    """Sum of the tLocal, sLocal, stLocal convolutions and the residual path."""
    total = add(conv2d(x, p.t_weight, p.t_bias), conv2d(x, p.s_weight, p.s_bias))
    total = add(total, conv2d(x, p.st_weight, p.st_bias))
    residual = x if p.res_weight is None else conv2d(x, p.res_weight)
    return add(total, residual)


def _finish(pre: Tensor, bn: BatchNormParams, mode: str) -> Tensor:
    unbatched = pre.ndim == 3
    if unbatched:
        pre = reshape(pre, (1,) + pre.shape)
    out = batchnorm(relu(pre), bn, mode)
    return reshape(out, out.shape[1:]) if unbatched else out


def local_block(x, params: LocalBlockParams, mode: str = "train", preactivation: bool = False):
    """Baseline local block: three convolutions + residual, then ReLU, then BN."""
    pre = _local_branches(as_tensor(x), params)
    return pre if preactivation else _finish(pre, params.bn, mode)


def slnl_block(x, params: SLnLBlockParams, mode: str = "train", preactivation: bool = False):
    """Local branches plus temporal, spatial and spatio-temporal non-local
    branches, summed, then ReLU, then BN."""
    x = as_tensor(x)
    pre = _local_branches(x, params.local)
    for nl in (params.temporal, params.spatial, params.spatiotemporal):
        pre = add(pre, nonlocal_map(x, nl))
    return pre if preactivation else _finish(pre, params.local.bn, mode)


def affinity_field(kind: str, k: int, t: int, n: int, target: tuple[int, int]) -> set[tuple[int, int]]:
    """Input cells that structurally reach ``target`` through one block."""
    t0, n0 = target
    if not (0 <= t0 < t and 0 <= n0 < n):
        raise IndexError(f"target {target} outside a {t}x{n} map")
    if kind == "slnl":
        return {(i, j) for i in range(t) for j in range(n)}
    if kind != "local":
        raise ValueError(f"block kind must be 'local' or 'slnl', got {kind!r}")
    r = k // 2
    return {(i, j)
            for i in range(max(0, t0 - r), min(t, t0 + r + 1))
            for j in range(max(0, n0 - r), min(n, n0 + r + 1))}


def empirical_affinity_field(block, x: np.ndarray, target: tuple[int, int],
                             delta: float = 1e-3, tol: float = 1e-12) -> set[tuple[int, int]]:
    """Cells whose perturbation moves ``block(x)`` at ``target``.

    ``block`` maps a (C, T, N) array to a (C_out, T, N) Tensor. Each cell is
    bumped by ``delta`` on every channel in turn.
    """
    base = block(x).data[:, target[0], target[1]]
    _, t, n = x.shape
    field = set()
    for i in range(t):
        for j in range(n):
            bumped = x.copy()
            bumped[:, i, j] += delta
            moved = block(bumped).data[:, target[0], target[1]]
            if np.max(np.abs(moved - base)) > tol:
                field.add((i, j))
    return field
