"""Two-stream SLnL-rFA model.

Each stream (position, velocity) runs: input batchnorm -> transform network
-> frequency attention -> M1 SLnL blocks -> M2 local blocks, with dropout
after every block and 2x2 max pooling every ``pool_every`` blocks, then
global average pooling. Three dense+softmax classifiers read the position
features, the velocity features, and their concatenation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .attention import VARIANTS, FreqAttentionParams, frequency_attention
from .blocks import LocalBlockParams, SLnLBlockParams, local_block, slnl_block
from .layers import BatchNormParams, batchnorm, dense, dropout, global_avg_pool, maxpool2
from .losses import LossConfig
from .tensor import ShapeError, Tensor, as_tensor, concat, softmax, temporal_diff
from .transform import TransformParams, transform_forward

__all__ = [
    "ModelConfig",
    "ModelParams",
    "StreamParams",
    "init_params",
    "model_forward",
    "model_logits",
    "named_tensors",
    "parameters",
]

FULL_SCALE = dict(channels=(64, 64, 128, 128, 256, 256), kernel=3, pool_every=2,
                   k_systems=10, n_aug=64, t_frames=64)


@dataclass(frozen=True)
class ModelConfig:
    d: int = 2
    n_joints: int = 16
    n_classes: int = 4
    t_frames: int = 16
    n_aug: int = 16
    k_systems: int = 2
    m1: int = 2
    m2: int = 2
    channels: tuple[int, ...] = (8, 8, 16, 16)
    kernel: int | tuple[int, ...] = 3
    pool_every: int = 2
    attention: str = "rfa"
    ratio: int = 4
    dropout: float = 0.2
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.m1 < 0 or self.m2 < 0 or self.m1 + self.m2 != len(self.channels):
            raise ValueError(f"m1 + m2 must equal the number of channel widths "
                             f"({self.m1} + {self.m2} != {len(self.channels)})")
        if self.attention not in VARIANTS:
            raise ValueError(f"attention must be one of {VARIANTS}, got {self.attention!r}")
        if any(k % 2 == 0 for k in self.kernels):
            raise ValueError("kernel extents must be odd")
        if self.pool_every < 1:
            raise ValueError("pool_every must be >= 1")
        t, n = self.t_frames, self.n_aug
        for i in range(len(self.channels)):
            if (i + 1) % self.pool_every == 0:
                t, n = t // 2, n // 2
                if t == 0 or n == 0:
                    raise ValueError("pooling schedule shrinks the map to nothing")

    @property
    def kernels(self) -> tuple[int, ...]:
        if isinstance(self.kernel, int):
            return (self.kernel,) * len(self.channels)
        if len(self.kernel) != len(self.channels):
            raise ValueError("one kernel extent per block is required")
        return tuple(self.kernel)

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


@dataclass(eq=False)
class StreamParams:
    input_bn: BatchNormParams
    transform: TransformParams
    attention: FreqAttentionParams
    blocks: list


@dataclass(eq=False)
class Classifier:
    weight: Tensor
    bias: Tensor

    @classmethod
    def init(cls, n_in: int, n_out: int, rng) -> "Classifier":
        lim = 1.0 / np.sqrt(n_in)
        return cls(Tensor(rng.uniform(-lim, lim, (n_out, n_in)), requires_grad=True),
                   Tensor(np.zeros(n_out), requires_grad=True))


@dataclass(eq=False)
class ModelParams:
    position: StreamParams
    velocity: StreamParams
    cls_position: Classifier
    cls_velocity: Classifier
    cls_concat: Classifier


def _init_stream(cfg: ModelConfig, rng) -> StreamParams:
    c = cfg.k_systems * cfg.d
    blocks = []
    for i, (width, k) in enumerate(zip(cfg.channels, cfg.kernels)):
        kind = SLnLBlockParams if i < cfg.m1 else LocalBlockParams
        blocks.append(kind.init(c, width, k, rng))
        c = width
    return StreamParams(
        input_bn=BatchNormParams.init(cfg.d),
        transform=TransformParams.init(cfg.d, cfg.n_joints, cfg.n_aug, cfg.k_systems, rng),
        attention=FreqAttentionParams.init(cfg.attention, cfg.t_frames, cfg.n_aug, cfg.ratio, rng),
        blocks=blocks,
    )


def init_params(cfg: ModelConfig, seed: int | None = None) -> ModelParams:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    width = cfg.channels[-1]
    return ModelParams(
        position=_init_stream(cfg, rng),
        velocity=_init_stream(cfg, rng),
        cls_position=Classifier.init(width, cfg.n_classes, rng),
        cls_velocity=Classifier.init(width, cfg.n_classes, rng),
        cls_concat=Classifier.init(2 * width, cfg.n_classes, rng),
    )


def named_tensors(obj, prefix: str = "") -> list[tuple[str, Tensor]]:
    """All tensors reachable from a parameter structure, first name wins for
    aliased storage (shared attention nets)."""
    seen: set[int] = set()
    out: list[tuple[str, Tensor]] = []

    def walk(o, name):
        if isinstance(o, Tensor):
            if id(o) not in seen:
                seen.add(id(o))
                out.append((name, o))
        elif dataclasses.is_dataclass(o) and not isinstance(o, type):
            for f in dataclasses.fields(o):
                walk(getattr(o, f.name), f"{name}.{f.name}" if name else f.name)
        elif isinstance(o, (list, tuple)):
            for i, item in enumerate(o):
                walk(item, f"{name}.{i}")

    walk(obj, prefix)
    return out


def parameters(params: ModelParams) -> list[Tensor]:
    return [t for _, t in named_tensors(params) if t.requires_grad]


def _stream(x: Tensor, s: StreamParams, cfg: ModelConfig, mode: str, rng) -> Tensor:
    h = batchnorm(x, s.input_bn, mode)
    h = transform_forward(h, s.transform)
    h = frequency_attention(h, s.attention)
    for i, block in enumerate(s.blocks):
        if isinstance(block, SLnLBlockParams):
            h = slnl_block(h, block, mode)
        else:
            h = local_block(h, block, mode)
        h = dropout(h, cfg.dropout, mode, rng)
        if (i + 1) % cfg.pool_every == 0:
            h = maxpool2(h)
    return global_avg_pool(h)


def model_logits(x, cfg: ModelConfig, params: ModelParams, mode: str = "eval", rng=None):
    """Classifier scores (z_position, z_velocity, z_concat) for a (B, d, T, N) batch."""
    x = as_tensor(x)
    if x.ndim == 3:
        x = x.reshape((1,) + x.shape)
    if x.shape[1:] != (cfg.d, cfg.t_frames, cfg.n_joints):
        raise ShapeError(f"expected input (B, {cfg.d}, {cfg.t_frames}, {cfg.n_joints}), "
                         f"got {x.shape}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(cfg.seed)
    feat_p = _stream(x, params.position, cfg, mode, rng)
    feat_v = _stream(temporal_diff(x, axis=-2), params.velocity, cfg, mode, rng)
    z_p = dense(feat_p, params.cls_position.weight, params.cls_position.bias)
    z_v = dense(feat_v, params.cls_velocity.weight, params.cls_velocity.bias)
    z_c = dense(concat([feat_p, feat_v], axis=-1), params.cls_concat.weight, params.cls_concat.bias)
    return z_p, z_v, z_c


def model_forward(x, cfg: ModelConfig, params: ModelParams, mode: str = "eval", rng=None):
    """Probability vectors (p_position, p_velocity, p_concat)."""
    return tuple(softmax(z) for z in model_logits(x, cfg, params, mode, rng))
