"""Soft-margin and focal loss family.

All scalar functions are vectorized over numpy arrays of true-class
probabilities ``p_t``. :func:`loss_op` is the tape-recorded batch loss used in
training.

The soft-margin term ``log(e^m + (1 - e^m) p_t)`` lies in [0, m] and adding it
to cross entropy is the same as lowering the true-class logit by ``m`` before
the softmax (see :func:`smce_from_logits`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _record, as_tensor

EPS = 1e-7
KINDS = ("CE", "FL", "SMCE", "SMFL")


@dataclass(frozen=True)
class LossConfig:
    kind: str = "SMFL"
    gamma: float = 2.0
    margin: float = 0.4
    epsilon: float = EPS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"loss kind must be one of {KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.gamma) and np.isfinite(self.margin)):
            raise ValueError("gamma and margin must be finite")
        if self.gamma < 0 or self.margin < 0:
            raise ValueError("gamma and margin must be non-negative")
        if not 0 < self.epsilon <= 1e-3:
            raise ValueError("epsilon must lie in (0, 1e-3]")
        if self.kind == "CE" and (self.gamma or self.margin):
            raise ValueError("CE requires gamma = 0 and margin = 0")
        if self.kind == "FL" and self.margin:
            raise ValueError("FL requires margin = 0")
        if self.kind == "SMCE" and self.gamma:
            raise ValueError("SMCE requires gamma = 0")

    @classmethod
    def make(cls, kind: str, gamma: float = 0.0, margin: float = 0.0, **kw) -> "LossConfig":
        """Build a config, zeroing the parameters a reduced kind does not use."""
        gamma = 0.0 if kind in ("CE", "SMCE") else gamma
        margin = 0.0 if kind in ("CE", "FL") else margin
        return cls(kind, float(gamma), float(margin), **kw)

    @property
    def label(self) -> str:
        """Name in the ``KIND(gamma,margin)`` style, e.g. ``FL(2,)``."""
        g = _fmt(self.gamma) if self.kind in ("FL", "SMFL") else ""
        m = _fmt(self.margin) if self.kind in ("SMCE", "SMFL") else ""
        return "CE" if self.kind == "CE" else f"{self.kind}({g},{m})"

    @property
    def pair(self) -> str:
        """``(gamma, m)`` with unused parameters shown as 0, e.g. ``(2, 0.4)``."""
        return f"({_fmt(self.gamma)}, {_fmt(self.margin)})"


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _check(gamma=0.0, margin=0.0):
    if np.any(np.asarray(margin) < 0):
        raise ValueError("margin must be non-negative")
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be non-negative")


def sm_term(p_t, m):
    """Soft-margin penalty; finite on the closed interval [0, 1]."""
    _check(margin=m)
    em = np.exp(m)
    return np.log(em + (1.0 - em) * np.asarray(p_t, dtype=np.float64))


def cross_entropy(p_t, eps: float = EPS):
    return -np.log(np.clip(p_t, eps, 1.0 - eps))


def focal_loss(p_t, gamma, eps: float = EPS):
    _check(gamma=gamma)
    p = np.clip(p_t, eps, 1.0 - eps)
    return -((1.0 - p) ** gamma * np.log(p))


def smce(p_t, m, eps: float = EPS):
    return sm_term(p_t, m) + cross_entropy(p_t, eps)


def smfl(p_t, gamma, m, eps: float = EPS):
    return sm_term(p_t, m) + focal_loss(p_t, gamma, eps)


def scalar_loss(p_t, cfg: LossConfig):
    """Loss of the configured kind at true-class probability ``p_t``."""
    return smfl(p_t, cfg.gamma, cfg.margin, cfg.epsilon)


def smce_from_logits(z, t: int, m: float) -> float:
    """Cross entropy after shifting the true-class score down by ``m``."""
    z = np.asarray(z, dtype=np.float64).copy()
    if not 0 <= t < z.size:
        raise IndexError(f"class {t} out of range for {z.size} scores")
    _check(margin=m)
    z[t] -= m
    top = z.max()
    return float(np.log(np.exp(z - top).sum()) + top - z[t])


def mode_loss(p, y, cfg: LossConfig) -> float:
    """One classifier's loss: sum_i y_i * loss(p_i) for one-hot ``y``."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    if y.shape != p.shape or not np.isin(y, (0, 1)).all() or y.sum() != 1:
        raise ValueError("y must be a one-hot vector matching p")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must sum to 1")
    return float(np.sum(np.where(y == 1, scalar_loss(p, cfg), 0.0)))


def total_loss(*losses):
    """Unweighted sum of the per-classifier losses."""
    out = losses[0]
    for extra in losses[1:]:
        out = out + extra
    return out


def _dloss_dp(p: np.ndarray, cfg: LossConfig) -> np.ndarray:
    em = np.exp(cfg.margin)
    g = (1.0 - em) / (em + (1.0 - em) * p)
    eps = cfg.epsilon
    inside = (p > eps) & (p < 1.0 - eps)
    q = np.clip(p, eps, 1.0 - eps)
    focal = -((1.0 - q) ** cfg.gamma) / q
    if cfg.gamma:
        focal = focal + cfg.gamma * (1.0 - q) ** (cfg.gamma - 1.0) * np.log(q)
    return g + np.where(inside, focal, 0.0)


def loss_op(probs, labels, cfg: LossConfig) -> Tensor:
    """Batch-mean loss of (B, C) probabilities against integer labels."""
    probs = as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(labels.size)
    p_t = probs.data[rows, labels]
    values = scalar_loss(p_t, cfg)
    batch = labels.size

    def vjp(g):
        grad = np.zeros_like(probs.data)
        grad[rows, labels] = g * _dloss_dp(p_t, cfg) / batch
        return (grad,)

    return _record("loss", np.asarray(values.mean()), (probs,), vjp)
