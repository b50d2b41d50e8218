"""Skeleton and coordinate transformers.

The skeleton transformer is one learned linear map over the joint axis
(augmentation and reordering are both special cases of its weight); the
coordinate transformer re-expresses each d-vector in K learned, possibly
oblique, coordinate systems and stacks them on the channel axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, add, as_tensor, matmul, reshape, transpose

__all__ = ["TransformParams", "coordinate_transform", "skeleton_transform", "transform_forward"]


@dataclass(eq=False)
class TransformParams:
    joint_weight: Tensor  # (N', N)
    joint_bias: Tensor  # (N',)
    coord_weight: Tensor  # (K, d, d)

    @property
    def n_joints(self) -> int:
        return self.joint_weight.shape[1]

    @property
    def n_aug(self) -> int:
        return self.joint_weight.shape[0]

    @property
    def k(self) -> int:
        return self.coord_weight.shape[0]

    @property
    def d(self) -> int:
        return self.coord_weight.shape[1]

    @classmethod
    def init(cls, d: int, n_joints: int, n_aug: int, k: int, rng, noise: float = 0.05):
        """Joint rows start as tiled identity rows, coordinate maps as identity,
        both perturbed by uniform(-noise, noise)."""
        if k < 1 or n_aug < 1:
            raise ValueError("K and N' must be positive")
        joint = np.eye(n_joints)[np.arange(n_aug) % n_joints]
        joint = joint + rng.uniform(-noise, noise, joint.shape)
        coord = np.eye(d)[None].repeat(k, axis=0) + rng.uniform(-noise, noise, (k, d, d))
        return cls(
            joint_weight=Tensor(joint, requires_grad=True),
            joint_bias=Tensor(np.zeros(n_aug), requires_grad=True),
            coord_weight=Tensor(coord, requires_grad=True),
        )


def skeleton_transform(x, params: TransformParams) -> Tensor:
    """(..., d, T, N) -> (..., d, T, N'), mapping the joint axis per frame."""
    x = as_tensor(x)
    if x.shape[-1] != params.n_joints:
        raise ShapeError(f"expected {params.n_joints} joints, got {x.shape[-1]}")
    return add(matmul(x, transpose(params.joint_weight)), params.joint_bias)


def coordinate_transform(x, params: TransformParams) -> Tensor:
    """(..., d, T, N') -> (..., K d, T, N'); channel k*d + c is coordinate c
    of the k-th system."""
    x = as_tensor(x)
    d = params.d
    if x.ndim < 3 or x.shape[-3] != d:
        raise ShapeError(f"expected {d} coordinate channels, got shape {x.shape}")
    lead = x.shape[:-3]
    t, n = x.shape[-2:]
    stacked = reshape(params.coord_weight, (params.k * d, d))
    # contract the coordinate axis: (Kd, d) @ (..., d, T*N)
    flat = reshape(x, lead + (d, t * n))
    return reshape(matmul(stacked, flat), lead + (params.k * d, t, n))


def transform_forward(x, params: TransformParams) -> Tensor:
    return coordinate_transform(skeleton_transform(x, params), params)
