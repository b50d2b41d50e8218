"""Frequency attention on DFT components of (…, C, T, N) feature maps.

Variants:

- ``rfa``: independent masks on the cosine and sinusoidal parts, inverse
  transform, plus the spatio-temporal input as a residual.
- ``dfa``: as ``rfa`` without the residual.
- ``sfa``: as ``dfa`` but both masks come from one shared parameter set.
- ``afa``: one mask computed from and applied to the amplitude spectrum; the
  signal is rebuilt with the original phase.
- ``none``: identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier import FreqComponents, amplitude, dft2, idft2, phase
from .layers import dense
from .tensor import (ShapeError, Tensor, add, as_tensor, broadcast_to, cos, mean, mul, neg,
                     reshape, sigmoid, sin)

VARIANTS = ("none", "afa", "sfa", "dfa", "rfa")

__all__ = [
    "FreqAttentionParams",
    "MaskNet",
    "VARIANTS",
    "afa_forward",
    "afa_spectrum",
    "attention_weights",
    "frequency_attention",
    "rfa_forward",
]


@dataclass(eq=False)
class MaskNet:
    """Bottleneck then expansion dense layers producing one frequency mask."""

    w_reduce: Tensor  # (h, T N)
    b_reduce: Tensor  # (h,)
    w_expand: Tensor  # (T N, h)
    b_expand: Tensor  # (T N,)

    @classmethod
    def init(cls, size: int, ratio: int, rng) -> "MaskNet":
        hidden = math.ceil(size / ratio)
        lim_r, lim_e = 1 / math.sqrt(size), 1 / math.sqrt(hidden)
        return cls(
            w_reduce=Tensor(rng.uniform(-lim_r, lim_r, (hidden, size)), requires_grad=True),
            b_reduce=Tensor(np.zeros(hidden), requires_grad=True),
            w_expand=Tensor(rng.uniform(-lim_e, lim_e, (size, hidden)), requires_grad=True),
            b_expand=Tensor(np.zeros(size), requires_grad=True),
        )

    @classmethod
    def zeros(cls, size: int, hidden: int) -> "MaskNet":
        return cls(*(Tensor(np.zeros(s), requires_grad=True)
                     for s in ((hidden, size), hidden, (size, hidden), size)))


@dataclass(eq=False)
class FreqAttentionParams:
    variant: str
    cos: MaskNet | None  # for afa: the amplitude mask
    sin: MaskNet | None  # aliases ``cos`` for sfa and afa

    @classmethod
    def init(cls, variant: str, t: int, n: int, ratio: int = 4, rng=None):
        if variant not in VARIANTS:
            raise ValueError(f"attention variant must be one of {VARIANTS}, got {variant!r}")
        if ratio < 1:
            raise ValueError("bottleneck ratio must be >= 1")
        if variant == "none":
            return cls(variant, None, None)
        rng = np.random.default_rng(rng)
        first = MaskNet.init(t * n, ratio, rng)
        second = MaskNet.init(t * n, ratio, rng) if variant in ("dfa", "rfa") else first
        return cls(variant, first, second)


def _mask(f: Tensor, net: MaskNet) -> Tensor:
    """Channel-averaged mask of shape (..., 1, T, N)."""
    *lead, _, t, n = f.shape
    if net.w_reduce.shape[1] != t * n:
        raise ShapeError(f"mask net expects {net.w_reduce.shape[1]} frequencies, got {t}x{n}")
    avg = reshape(mean(f, axis=-3), (int(np.prod(lead, dtype=int)), t * n))
    hidden = dense(avg, net.w_reduce, net.b_reduce)
    weights = sigmoid(dense(hidden, net.w_expand, net.b_expand))
    return reshape(weights, (*lead, 1, t, n))


def attention_weights(f, net: MaskNet) -> Tensor:
    """Per-frequency weights in (0, 1), duplicated over the channel axis."""
    f = as_tensor(f)
    return broadcast_to(_mask(f, net), f.shape)


def rfa_forward(x, params: FreqAttentionParams, forced_masks=None) -> Tensor:
    """Residual (``rfa``) or plain (``dfa``/``sfa``) component attention.

    ``forced_masks=(m_cos, m_sin)`` bypasses the mask networks (test hook).
    """
    x = as_tensor(x)
    freq = dft2(x)
    if forced_masks is None:
        m_cos = _mask(freq.f_cos, params.cos)
        m_sin = _mask(freq.f_sin, params.sin)
    else:
        m_cos, m_sin = (as_tensor(m) for m in forced_masks)
    attended = FreqComponents(mul(freq.f_cos, m_cos), mul(freq.f_sin, m_sin))
    out = idft2(attended)
    return add(x, out) if params.variant == "rfa" else out


def afa_spectrum(x, params: FreqAttentionParams, forced_mask=None) -> FreqComponents:
    """Masked amplitude recombined with the input's phase, before inversion."""
    freq = dft2(as_tensor(x))
    amp, ang = amplitude(freq), phase(freq)
    m = _mask(amp, params.cos) if forced_mask is None else as_tensor(forced_mask)
    scaled = mul(amp, m)
    return FreqComponents(mul(scaled, cos(ang)), neg(mul(scaled, sin(ang))))


def afa_forward(x, params: FreqAttentionParams, forced_mask=None) -> Tensor:
    """Amplitude attention; ``forced_mask`` bypasses the mask network.

    A mask that is not symmetric under (u, v) -> (-u, -v) yields a complex
    inverse; the real part is kept, as everywhere else.
    """
    return idft2(afa_spectrum(x, params, forced_mask))


def frequency_attention(x, params: FreqAttentionParams) -> Tensor:
    if params.variant == "none":
        return as_tensor(x)
    if params.variant == "afa":
        return afa_forward(x, params)
    return rfa_forward(x, params)
